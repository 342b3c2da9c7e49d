//! Model checkpoints.
//!
//! Binary layout, all integers 32-bit little-endian: magic `GFDC`, format
//! version, then the architecture echo (channels, blocks, upscale) and the
//! training iteration, then every layer in storage order — the 4-D weight
//! tensor followed by the 1-D bias, each as a dimension count, the
//! dimensions, and raw 32-bit floats. Parameters are held in f64 while
//! training but stored at f32, so load∘save is exact at 32-bit precision.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nnet::{ModelDims, ModelParams};

const MAGIC: &[u8; 4] = b"GFDC";
const VERSION: u32 = 1;

fn push_u32(bytes: &mut Vec<u8>, v: u32) {
    bytes.extend_from_slice(&v.to_le_bytes());
}

fn as_u32(value: usize, what: &str) -> Result<u32> {
    u32::try_from(value)
        .map_err(|_| Error::InvalidConfig(format!("{what} {value} exceeds the 32-bit format")))
}

/// Serializes parameters plus the iteration counter reached in training.
pub fn save_checkpoint(params: &ModelParams, iteration: u64, path: &Path) -> Result<()> {
    let dims = params.dims();
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    push_u32(&mut bytes, VERSION);
    push_u32(&mut bytes, as_u32(dims.channels, "channel count")?);
    push_u32(&mut bytes, as_u32(dims.blocks, "block count")?);
    push_u32(&mut bytes, as_u32(dims.upscale, "upscale factor")?);
    push_u32(
        &mut bytes,
        u32::try_from(iteration).map_err(|_| {
            Error::InvalidConfig(format!("iteration {iteration} exceeds the 32-bit format"))
        })?,
    );

    for slot in params.slots() {
        push_u32(&mut bytes, 4);
        for d in [slot.spec.out_c, slot.spec.in_c, 3, 3] {
            push_u32(&mut bytes, as_u32(d, "tensor dimension")?);
        }
        for &w in params.weight(&slot) {
            bytes.extend_from_slice(&(w as f32).to_le_bytes());
        }
        push_u32(&mut bytes, 1);
        push_u32(&mut bytes, as_u32(slot.spec.out_c, "tensor dimension")?);
        for &b in params.bias(&slot) {
            bytes.extend_from_slice(&(b as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                path: self.path.to_path_buf(),
                reason: format!(
                    "truncated: wanted {n} bytes at offset {}, file ends at {}",
                    self.pos,
                    self.bytes.len()
                ),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn expect_dims(&mut self, expected: &[usize], what: &str) -> Result<()> {
        let ndim = self.u32()? as usize;
        if ndim != expected.len() {
            return Err(Error::DimMismatch(format!(
                "{what}: {ndim} dimensions stored, architecture expects {}",
                expected.len()
            )));
        }
        for &want in expected {
            let got = self.u32()? as usize;
            if got != want {
                return Err(Error::DimMismatch(format!(
                    "{what}: dimension {got} stored, architecture expects {want}"
                )));
            }
        }
        Ok(())
    }
}

/// Reads a checkpoint back as `(parameters, iteration)`.
pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, u64)> {
    let bytes =
        fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };

    if r.take(4)? != MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: "bad magic; not a checkpoint file".into(),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::UnsupportedVariant {
            path: path.to_path_buf(),
            reason: format!("format version {version}; this build reads {VERSION}"),
        });
    }
    let dims = ModelDims {
        channels: r.u32()? as usize,
        blocks: r.u32()? as usize,
        upscale: r.u32()? as usize,
    };
    dims.validate()?;
    let iteration = r.u32()? as u64;

    let mut flat = Vec::with_capacity(dims.param_count());
    let template = ModelParams::zeros(dims)?;
    for (i, slot) in template.slots().iter().enumerate() {
        r.expect_dims(&[slot.spec.out_c, slot.spec.in_c, 3, 3], &format!("layer {i} weight"))?;
        for _ in 0..slot.spec.weight_len() {
            flat.push(r.f32()? as f64);
        }
        r.expect_dims(&[slot.spec.out_c], &format!("layer {i} bias"))?;
        for _ in 0..slot.spec.out_c {
            flat.push(r.f32()? as f64);
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("{} trailing bytes after parameters", bytes.len() - r.pos),
        });
    }
    Ok((ModelParams::from_flat(dims, flat)?, iteration))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::init_params;
    use tempfile::tempdir;

    fn small_dims() -> ModelDims {
        ModelDims {
            channels: 4,
            blocks: 2,
            upscale: 4,
        }
    }

    #[test]
    fn round_trip_is_bit_exact_at_f32() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let params = init_params(small_dims(), 99).unwrap();
        save_checkpoint(&params, 1234, &path).unwrap();
        let (loaded, iteration) = load_checkpoint(&path).unwrap();
        assert_eq!(iteration, 1234);
        assert_eq!(loaded.dims(), small_dims());
        for (&a, &b) in params.flat().iter().zip(loaded.flat()) {
            assert_eq!(a as f32, b as f32);
            assert_eq!(b, (b as f32) as f64);
        }
        // A second save of the loaded params reproduces the file bytes.
        let path2 = dir.path().join("model2.ckpt");
        save_checkpoint(&loaded, 1234, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn corrupted_magic_is_a_format_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let params = init_params(small_dims(), 1).unwrap();
        save_checkpoint(&params, 0, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn unknown_version_is_unsupported() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let params = init_params(small_dims(), 1).unwrap();
        save_checkpoint(&params, 0, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 2;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::UnsupportedVariant { .. })
        ));
    }

    #[test]
    fn truncation_is_detected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let params = init_params(small_dims(), 1).unwrap();
        save_checkpoint(&params, 0, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn dims_echo_travels_with_the_file() {
        // A checkpoint written under one architecture reports its own dims;
        // callers comparing against another architecture see the mismatch.
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let params = init_params(small_dims(), 1).unwrap();
        save_checkpoint(&params, 7, &path).unwrap();
        let (loaded, _) = load_checkpoint(&path).unwrap();
        let wanted = ModelDims {
            channels: 8,
            ..small_dims()
        };
        assert_ne!(loaded.dims(), wanted);
    }
}
