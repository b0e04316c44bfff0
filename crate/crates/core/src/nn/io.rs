//! PCNN parameter files.
//!
//! Layout (little-endian): `"PCNN"` | u32 version (1) | config echo |
//! u8 scalar width (4 or 8) | u32 tensor count | per tensor: u32 rank,
//! rank × u32 dims, raw values. The config echo is 4 × u32 stage channels,
//! 4 × u32 blocks per stage, u32 feature dim, 4 × u32 input shape,
//! 4 × u8 temporal flags, 4 × u8 spatial flags. Tensors follow
//! [`NetworkParams::all_tensors`] order.

use std::path::Path;

use super::network::{NetworkConfig, NetworkParams};
use super::tensor::Scalar;
use super::{NnError, Result};

const MAGIC: &[u8; 4] = b"PCNN";
const VERSION: u32 = 1;

fn encode_config(c: &NetworkConfig, out: &mut Vec<u8>) {
    let words = c
        .stage_channels
        .iter()
        .chain(&c.blocks_per_stage)
        .chain(std::iter::once(&c.feature_dim))
        .chain(&c.input_shape);
    for &w in words {
        out.extend_from_slice(&(w as u32).to_le_bytes());
    }
    out.extend(c.temporal_downsample.iter().map(|&b| b as u8));
    out.extend(c.spatial_downsample.iter().map(|&b| b as u8));
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(NnError::BadParamFile("truncated".into()));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

fn decode_config(r: &mut Reader) -> Result<NetworkConfig> {
    let mut words = [0usize; 13];
    for w in &mut words {
        *w = r.u32()? as usize;
    }
    let mut flags = [false; 8];
    for f in &mut flags {
        *f = match r.u8()? {
            0 => false,
            1 => true,
            other => return Err(NnError::BadParamFile(format!("bad flag byte {other}"))),
        };
    }
    Ok(NetworkConfig {
        stage_channels: words[0..4].try_into().unwrap(),
        blocks_per_stage: words[4..8].try_into().unwrap(),
        feature_dim: words[8],
        input_shape: words[9..13].try_into().unwrap(),
        temporal_downsample: flags[0..4].try_into().unwrap(),
        spatial_downsample: flags[4..8].try_into().unwrap(),
    })
}

pub fn encode_params<T: Scalar>(params: &NetworkParams<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    encode_config(&params.config, &mut out);
    out.push(T::BYTES as u8);
    let tensors = params.all_tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            v.write_le(&mut out);
        }
    }
    out
}

/// Decodes a parameter file, requiring its config to equal `expected`.
pub fn decode_params<T: Scalar>(bytes: &[u8], expected: &NetworkConfig) -> Result<NetworkParams<T>> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(NnError::BadParamFile("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(NnError::BadParamFile(format!("unsupported version {version}")));
    }
    let config = decode_config(&mut r)?;
    if &config != expected {
        return Err(NnError::ConfigMismatch);
    }
    let width = r.u8()? as usize;
    if width != T::BYTES {
        return Err(NnError::BadParamFile(format!("stored {width}-byte scalars, expected {}", T::BYTES)));
    }
    // Template supplies shapes; values are overwritten below.
    let mut params = NetworkParams::<T>::init(&config, 0)?;
    let count = r.u32()? as usize;
    let mut slots = params.all_tensors_mut();
    if count != slots.len() {
        return Err(NnError::BadParamFile(format!("{count} tensors, expected {}", slots.len())));
    }
    for t in slots.iter_mut() {
        let rank = r.u32()? as usize;
        let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if dims != t.shape() {
            return Err(NnError::BadParamFile(format!("tensor shape {dims:?}, expected {:?}", t.shape())));
        }
        for v in t.data_mut() {
            *v = T::read_le(r.take(T::BYTES)?);
        }
    }
    if r.at != bytes.len() {
        return Err(NnError::BadParamFile("trailing bytes".into()));
    }
    Ok(params)
}

pub fn save_params<T: Scalar>(params: &NetworkParams<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_params(params))?;
    Ok(())
}

pub fn load_params<T: Scalar>(path: impl AsRef<Path>, expected: &NetworkConfig) -> Result<NetworkParams<T>> {
    decode_params(&std::fs::read(path)?, expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> NetworkConfig {
        NetworkConfig { stage_channels: [2, 3, 4, 5], input_shape: [3, 4, 8, 8], ..NetworkConfig::desk() }
    }

    #[test]
    fn round_trip_exact() {
        let p = NetworkParams::<f32>::init(&cfg(), 9).unwrap();
        let bytes = encode_params(&p);
        let q: NetworkParams<f32> = decode_params(&bytes, &cfg()).unwrap();
        assert_eq!(p, q);
        assert_eq!(encode_params(&q), bytes);
    }

    #[test]
    fn rejects_bad_files() {
        let p = NetworkParams::<f64>::init(&cfg(), 9).unwrap();
        let mut bytes = encode_params(&p);
        let other = NetworkConfig { stage_channels: [2, 3, 4, 6], ..cfg() };
        assert!(matches!(decode_params::<f64>(&bytes, &other), Err(NnError::ConfigMismatch)));
        assert!(matches!(decode_params::<f32>(&bytes, &cfg()), Err(NnError::BadParamFile(_))));
        assert!(decode_params::<f64>(&bytes[..bytes.len() - 1], &cfg()).is_err());
        bytes[0] = b'X';
        assert!(matches!(decode_params::<f64>(&bytes, &cfg()), Err(NnError::BadParamFile(_))));
    }
}
