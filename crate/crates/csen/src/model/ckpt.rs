//! Model checkpoints (format `CSEN1CKPT`) and the training curve CSV.
//!
//! Checkpoint layout, all integers little-endian:
//!   9-byte magic `CSEN1CKPT`, u16 version (=1),
//!   u64 grid_h, u64 grid_w, u64 layer_count,
//!   per layer: u8 kind (0 conv, 1 down, 2 up), u8 activation (0 relu,
//!   1 linear), u64 in_ch, u64 out_ch,
//!   then per conv layer two CSM1-style blocks (u64 rows, u64 cols, f64
//!   values row-major): kernels as (out_ch × 9·in_ch) in [out][in][ky][kx]
//!   order, then biases as (1 × out_ch).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::train::EpochStats;
use super::{Activation, ConvParams, CsenModel, LayerKind, LayerSpec};
use crate::error::{Error, Result};

const MAGIC: &[u8; 9] = b"CSEN1CKPT";
const VERSION: u16 = 1;

struct Counter<W: Write> {
    inner: W,
}

impl<W: Write> Counter<W> {
    fn write(&mut self, buf: &[u8], path: &Path) -> Result<()> {
        self.inner.write_all(buf).map_err(|e| Error::io(path, e))
    }
}

impl CsenModel {
    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Counter {
            inner: BufWriter::new(file),
        };
        w.write(MAGIC, path)?;
        w.write(&VERSION.to_le_bytes(), path)?;
        w.write(&(self.grid.0 as u64).to_le_bytes(), path)?;
        w.write(&(self.grid.1 as u64).to_le_bytes(), path)?;
        w.write(&(self.layers.len() as u64).to_le_bytes(), path)?;
        for spec in &self.layers {
            let kind = match spec.kind {
                LayerKind::Conv3x3 => 0u8,
                LayerKind::DownSample2x => 1,
                LayerKind::UpSample2x => 2,
            };
            let act = match spec.activation {
                Activation::ReLU => 0u8,
                Activation::Linear => 1,
            };
            w.write(&[kind, act], path)?;
            w.write(&(spec.in_channels as u64).to_le_bytes(), path)?;
            w.write(&(spec.out_channels as u64).to_le_bytes(), path)?;
        }
        for (spec, params) in self.layers.iter().zip(&self.params) {
            let Some(p) = params else { continue };
            w.write(&(spec.out_channels as u64).to_le_bytes(), path)?;
            w.write(&((9 * spec.in_channels) as u64).to_le_bytes(), path)?;
            for v in &p.w {
                w.write(&v.to_le_bytes(), path)?;
            }
            w.write(&1u64.to_le_bytes(), path)?;
            w.write(&(spec.out_channels as u64).to_le_bytes(), path)?;
            for v in &p.b {
                w.write(&v.to_le_bytes(), path)?;
            }
        }
        w.inner.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<CsenModel> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = Reader {
            inner: BufReader::new(file),
            offset: 0,
        };

        let mut magic = [0u8; 9];
        r.read(&mut magic, path)?;
        if &magic != MAGIC {
            return Err(r.format_err(path, 0, "bad magic, expected CSEN1CKPT"));
        }
        let version = r.read_u16(path)?;
        if version != VERSION {
            return Err(r.format_err(path, 9, format!("unsupported version {version}")));
        }
        let grid_h = r.read_u64(path)? as usize;
        let grid_w = r.read_u64(path)? as usize;
        let layer_count = r.read_u64(path)? as usize;
        if layer_count == 0 || layer_count > 64 {
            return Err(r.format_err(path, 27, format!("implausible layer count {layer_count}")));
        }
        let mut layers = Vec::with_capacity(layer_count);
        for i in 0..layer_count {
            let mut kv = [0u8; 2];
            r.read(&mut kv, path)?;
            let kind = match kv[0] {
                0 => LayerKind::Conv3x3,
                1 => LayerKind::DownSample2x,
                2 => LayerKind::UpSample2x,
                other => {
                    return Err(r.format_err(
                        path,
                        r.offset - 2,
                        format!("layer {i}: unknown kind tag {other}"),
                    ))
                }
            };
            let activation = match kv[1] {
                0 => Activation::ReLU,
                1 => Activation::Linear,
                other => {
                    return Err(r.format_err(
                        path,
                        r.offset - 1,
                        format!("layer {i}: unknown activation tag {other}"),
                    ))
                }
            };
            let in_channels = r.read_u64(path)? as usize;
            let out_channels = r.read_u64(path)? as usize;
            layers.push(LayerSpec {
                kind,
                in_channels,
                out_channels,
                activation,
            });
        }
        let mut params = Vec::with_capacity(layer_count);
        for spec in &layers {
            if spec.kind != LayerKind::Conv3x3 {
                params.push(None);
                continue;
            }
            let rows = r.read_u64(path)? as usize;
            let cols = r.read_u64(path)? as usize;
            if rows != spec.out_channels || cols != 9 * spec.in_channels {
                return Err(r.format_err(
                    path,
                    r.offset - 16,
                    format!("kernel block is {rows}x{cols}, layer expects weights for {}→{}",
                        spec.in_channels, spec.out_channels),
                ));
            }
            let w = r.read_f64s(rows * cols, path)?;
            let brows = r.read_u64(path)? as usize;
            let bcols = r.read_u64(path)? as usize;
            if brows != 1 || bcols != spec.out_channels {
                return Err(r.format_err(path, r.offset - 16, "bias block shape"));
            }
            let b = r.read_f64s(bcols, path)?;
            params.push(Some(ConvParams { w, b }));
        }
        CsenModel::from_parts(layers, params, (grid_h, grid_w))
    }
}

struct Reader<R: Read> {
    inner: R,
    offset: u64,
}

impl<R: Read> Reader<R> {
    fn read(&mut self, buf: &mut [u8], path: &Path) -> Result<()> {
        let at = self.offset;
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format {
                    path: path.to_path_buf(),
                    offset: at,
                    what: format!("truncated: expected {} more bytes", buf.len()),
                }
            } else {
                Error::io(path, e)
            }
        })?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn read_u16(&mut self, path: &Path) -> Result<u16> {
        let mut b = [0u8; 2];
        self.read(&mut b, path)?;
        Ok(u16::from_le_bytes(b))
    }

    fn read_u64(&mut self, path: &Path) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read(&mut b, path)?;
        Ok(u64::from_le_bytes(b))
    }

    fn read_f64s(&mut self, count: usize, path: &Path) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut b = [0u8; 8];
        for _ in 0..count {
            self.read(&mut b, path)?;
            out.push(f64::from_le_bytes(b));
        }
        Ok(out)
    }

    fn format_err(&self, path: &Path, offset: u64, what: impl Into<String>) -> Error {
        Error::Format {
            path: path.to_path_buf(),
            offset,
            what: what.into(),
        }
    }
}

/// Write the per-epoch curve as `epoch,train_loss,val_loss,val_f1`;
/// validation columns stay empty when no validation set was supplied.
pub fn write_loss_curve(path: impl AsRef<Path>, curve: &[EpochStats]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
    writeln!(w, "epoch,train_loss,val_loss,val_f1").map_err(|e| Error::io(path, e))?;
    for e in curve {
        writeln!(
            w,
            "{},{:.17e},{},{}",
            e.epoch,
            e.train_loss,
            fmt(e.val_loss),
            fmt(e.val_f1)
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{csen1_init, csen2_init};
    use crate::numerics::Matrix;

    #[test]
    fn checkpoint_roundtrip_preserves_forward_bitwise() {
        let dir = std::env::temp_dir().join("csen_ckpt_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        for (name, model) in [
            ("c1", csen1_init((8, 8), 42).unwrap()),
            ("c2", csen2_init((8, 8), 42).unwrap()),
        ] {
            let path = dir.join(format!("{name}.ckpt"));
            model.save_checkpoint(&path).unwrap();
            let loaded = CsenModel::load_checkpoint(&path).unwrap();
            let proxy = Matrix::from_fn(8, 8, |i, j| ((i * 8 + j) as f64 * 0.31).sin());
            assert_eq!(
                model.forward(&proxy).unwrap(),
                loaded.forward(&proxy).unwrap()
            );
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn corrupt_magic_is_rejected_with_offset() {
        let dir = std::env::temp_dir().join("csen_ckpt_badmagic");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.ckpt");
        std::fs::write(&path, b"WRONGMAGICxxxxxxxxxxxxxxxx").unwrap();
        match CsenModel::load_checkpoint(&path) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn truncated_checkpoint_reports_offset() {
        let dir = std::env::temp_dir().join("csen_ckpt_trunc");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.ckpt");
        csen1_init((8, 8), 0).unwrap().save_checkpoint(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..200]).unwrap();
        match CsenModel::load_checkpoint(&path) {
            Err(Error::Format { offset, .. }) => assert!(offset <= 200),
            other => panic!("expected format error, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn loss_curve_has_expected_shape() {
        let dir = std::env::temp_dir().join("csen_curve");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("curve.csv");
        let curve = vec![
            EpochStats {
                epoch: 0,
                train_loss: 12.5,
                val_loss: Some(13.0),
                val_f1: Some(0.5),
            },
            EpochStats {
                epoch: 1,
                train_loss: 10.0,
                val_loss: None,
                val_f1: None,
            },
        ];
        write_loss_curve(&path, &curve).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "epoch,train_loss,val_loss,val_f1");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with(",,"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
