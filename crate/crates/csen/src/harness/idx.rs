//! IDX image/label ingestion (the MNIST container format).
//!
//! Gzip-compressed files are handled transparently by extension. Pixels
//! are scaled to [0,1]. Errors carry the byte offset of the first
//! uninterpretable byte (offsets refer to the decompressed stream).

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::bufread::GzDecoder;

use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Load paired image/label IDX files. Each image is flattened row-major
/// to a vector of length rows×cols with intensities in [0,1].
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<Vec<(Vec<f64>, u8)>> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let images = load_images(images_path)?;
    let labels = load_labels(labels_path)?;
    if images.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    Ok(images.into_iter().zip(labels).collect())
}

fn open(path: &Path) -> Result<Box<dyn Read>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzDecoder::new(reader)))
    } else {
        Ok(Box::new(reader))
    }
}

struct Tracked {
    inner: Box<dyn Read>,
    offset: u64,
    path: PathBuf,
}

impl Tracked {
    fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        let at = self.offset;
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format {
                    path: self.path.clone(),
                    offset: at,
                    what: format!("truncated: expected {} more bytes", buf.len()),
                }
            } else {
                Error::io(&self.path, e)
            }
        })?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn read_u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b)?;
        Ok(u32::from_be_bytes(b))
    }
}

fn load_images(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = Tracked {
        inner: open(path)?,
        offset: 0,
        path: path.to_path_buf(),
    };
    let magic = r.read_u32()?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            what: format!("bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        });
    }
    let count = r.read_u32()? as usize;
    let rows = r.read_u32()? as usize;
    let cols = r.read_u32()? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 8,
            what: format!("degenerate image dims {rows}x{cols}"),
        });
    }
    let mut images = Vec::with_capacity(count);
    let mut buf = vec![0u8; rows * cols];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        images.push(buf.iter().map(|&b| b as f64 / 255.0).collect());
    }
    Ok(images)
}

fn load_labels(path: &Path) -> Result<Vec<u8>> {
    let mut r = Tracked {
        inner: open(path)?,
        offset: 0,
        path: path.to_path_buf(),
    };
    let magic = r.read_u32()?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            what: format!("bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        });
    }
    let count = r.read_u32()? as usize;
    let mut buf = vec![0u8; count];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

/// Resolve an MNIST-style file inside `dir`, preferring the plain name and
/// falling back to `<name>.gz`.
pub fn resolve_idx_file(dir: &Path, name: &str) -> Result<PathBuf> {
    let plain = dir.join(name);
    if plain.exists() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.exists() {
        return Ok(gz);
    }
    Err(Error::invalid(format!(
        "neither {name} nor {name}.gz found in {dir:?}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_fixture(dir: &Path, pixels: &[u8], label: u8) -> (PathBuf, PathBuf) {
        let img = dir.join("img.idx");
        let lbl = dir.join("lbl.idx");
        let mut f = File::create(&img).unwrap();
        f.write_all(&IMAGES_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&1u32.to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        f.write_all(pixels).unwrap();
        let mut f = File::create(&lbl).unwrap();
        f.write_all(&LABELS_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&1u32.to_be_bytes()).unwrap();
        f.write_all(&[label]).unwrap();
        (img, lbl)
    }

    #[test]
    fn fixture_roundtrip() {
        let dir = std::env::temp_dir().join("idx_fixture_test");
        std::fs::create_dir_all(&dir).unwrap();
        let (img, lbl) = write_fixture(&dir, &[0, 51, 102, 255], 7);
        let data = load_idx(&img, &lbl).unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data[0].1, 7);
        let px = &data[0].0;
        assert_eq!(px[0], 0.0);
        assert!((px[1] - 0.2).abs() < 1e-15);
        assert!((px[2] - 0.4).abs() < 1e-15);
        assert_eq!(px[3], 1.0);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn bad_magic_is_reported_at_offset_zero() {
        let dir = std::env::temp_dir().join("idx_magic_test");
        std::fs::create_dir_all(&dir).unwrap();
        let (img, lbl) = write_fixture(&dir, &[0, 0, 0, 0], 0);
        let mut bytes = std::fs::read(&img).unwrap();
        bytes[3] = 0x99;
        std::fs::write(&img, &bytes).unwrap();
        match load_idx(&img, &lbl) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn truncation_is_reported_at_documented_offset() {
        let dir = std::env::temp_dir().join("idx_trunc_test");
        std::fs::create_dir_all(&dir).unwrap();
        let (img, lbl) = write_fixture(&dir, &[1, 2, 3, 4], 0);
        let bytes = std::fs::read(&img).unwrap();
        std::fs::write(&img, &bytes[..bytes.len() - 2]).unwrap();
        match load_idx(&img, &lbl) {
            // Pixel payload starts at byte 16.
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 16),
            other => panic!("expected format error, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
