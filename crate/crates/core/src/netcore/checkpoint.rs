//! Versioned flat binary checkpoint for [`NetworkParameters`].
//!
//! Layout (little-endian): magic `NLCK`, `u32` version, `u32` layer count, one
//! `u32` per layer dim, then per layer the row-major `(fan_in, fan_out)` weight
//! matrix followed by the bias vector as `f64`.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

use super::network::NetworkParameters;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NLCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(params: &NetworkParameters) -> Vec<u8> {
    let dims = params.layer_dims();
    let mut out = Vec::with_capacity(12 + 4 * dims.len() + 8 * params.parameter_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in params.iter_values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Parse {
                offset: self.pos as u64,
                message: format!("unexpected end of data while reading {what}"),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<NetworkParameters> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: "not a checkpoint (bad magic)".into(),
        });
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Parse {
            offset: 4,
            message: format!("unsupported checkpoint version {version}"),
        });
    }
    let count_at = r.pos as u64;
    let count = r.u32("layer count")? as usize;
    if !(2..=64).contains(&count) {
        return Err(Error::Parse {
            offset: count_at,
            message: format!("implausible layer count {count}"),
        });
    }
    let mut dims = Vec::with_capacity(count);
    for _ in 0..count {
        dims.push(r.u32("layer dim")? as usize);
    }
    let mut weights = Vec::with_capacity(count - 1);
    let mut biases = Vec::with_capacity(count - 1);
    for pair in dims.windows(2) {
        let mut w = Vec::with_capacity(pair[0] * pair[1]);
        for _ in 0..pair[0] * pair[1] {
            w.push(r.f64("weight")?);
        }
        let mut b = Vec::with_capacity(pair[1]);
        for _ in 0..pair[1] {
            b.push(r.f64("bias")?);
        }
        weights.push(Array2::from_shape_vec((pair[0], pair[1]), w).expect("length matches shape"));
        biases.push(Array1::from(b));
    }
    if r.pos != bytes.len() {
        return Err(Error::Parse {
            offset: r.pos as u64,
            message: "trailing bytes after checkpoint body".into(),
        });
    }
    NetworkParameters::from_parts(dims, weights, biases).map_err(|e| Error::Parse {
        offset: count_at,
        message: e.to_string(),
    })
}

pub fn save_checkpoint(params: &NetworkParameters, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(params))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkParameters> {
    decode_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::network::init_network;

    #[test]
    fn round_trip_is_bit_exact() {
        let p = init_network(&[4, 6, 3], 5).unwrap();
        let back = decode_checkpoint(&encode_checkpoint(&p)).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn header_layout() {
        let p = init_network(&[2, 3], 5).unwrap();
        let bytes = encode_checkpoint(&p);
        assert_eq!(&bytes[..4], b"NLCK");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(bytes.len(), 12 + 8 + 8 * (6 + 3));
        assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), p.weights()[0][(0, 0)]);
    }

    #[test]
    fn truncation_reports_offset() {
        let p = init_network(&[2, 3], 5).unwrap();
        let bytes = encode_checkpoint(&p);
        match decode_checkpoint(&bytes[..bytes.len() - 3]) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset as usize, bytes.len() - 8),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(decode_checkpoint(b"NOPE"), Err(Error::Parse { offset: 0, .. })));
    }
}
