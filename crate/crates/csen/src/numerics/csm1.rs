//! CSM1 on-disk matrix format.
//!
//! Layout: 8-byte magic `CSENMAT1`, two u64 little-endian dims (rows, cols),
//! then rows*cols f64 little-endian values, row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

const MAGIC: &[u8; 8] = b"CSENMAT1";

impl Matrix {
    pub fn write_csm1(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io_err = |e| Error::io(path, e);
        w.write_all(MAGIC).map_err(io_err)?;
        w.write_all(&(self.rows() as u64).to_le_bytes()).map_err(io_err)?;
        w.write_all(&(self.cols() as u64).to_le_bytes()).map_err(io_err)?;
        for v in self.data() {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn read_csm1(path: impl AsRef<Path>) -> Result<Matrix> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let format_err = |offset: u64, what: &str| Error::Format {
            path: path.to_path_buf(),
            offset,
            what: what.to_string(),
        };

        let mut magic = [0u8; 8];
        read_exact_at(&mut r, &mut magic, 0, path)?;
        if &magic != MAGIC {
            return Err(format_err(0, "bad magic, expected CSENMAT1"));
        }
        let mut dim = [0u8; 8];
        read_exact_at(&mut r, &mut dim, 8, path)?;
        let rows = u64::from_le_bytes(dim) as usize;
        read_exact_at(&mut r, &mut dim, 16, path)?;
        let cols = u64::from_le_bytes(dim) as usize;

        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| format_err(8, "dimension overflow"))?;
        let mut data = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for i in 0..count {
            read_exact_at(&mut r, &mut buf, 24 + 8 * i as u64, path)?;
            data.push(f64::from_le_bytes(buf));
        }
        // Trailing garbage is a format error too: the file must be exactly
        // the advertised size.
        let mut probe = [0u8; 1];
        match r.read(&mut probe) {
            Ok(0) => {}
            Ok(_) => return Err(format_err(24 + 8 * count as u64, "trailing bytes")),
            Err(e) => return Err(Error::io(path, e)),
        }
        Matrix::new(rows, cols, data)
    }
}

fn read_exact_at(r: &mut impl Read, buf: &mut [u8], offset: u64, path: &Path) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format {
                path: path.to_path_buf(),
                offset,
                what: format!("truncated: expected {} more bytes", buf.len()),
            }
        } else {
            Error::io(path, e)
        }
    })
}
