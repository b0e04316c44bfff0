//! PCV: a raw little-endian frame container.
//!
//! Layout: `"PCVS"` | u32 version (1) | u32 width | u32 height |
//! u32 frame_count | u8 orbit id (0/1/2) | frame_count × width·height·3 RGB bytes.

use std::path::Path;

use super::{Frame, RenderError, Result, VideoSequence};
use crate::camera::OrbitId;

const MAGIC: &[u8; 4] = b"PCVS";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcvHeader {
    pub width: u32,
    pub height: u32,
    pub frame_count: u32,
    pub orbit: OrbitId,
}

pub fn encode_sequence(seq: &VideoSequence) -> Vec<u8> {
    let frame_len = seq.width() * seq.height() * 3;
    let mut out = Vec::with_capacity(HEADER_LEN + frame_len * seq.len());
    out.extend_from_slice(MAGIC);
    for v in [VERSION, seq.width() as u32, seq.height() as u32, seq.len() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(seq.orbit.index());
    for f in seq.frames() {
        out.extend_from_slice(f.pixels());
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn parse_header(bytes: &[u8]) -> Result<PcvHeader> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(RenderError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(RenderError::TruncatedFile { expected: HEADER_LEN, found: bytes.len() });
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(RenderError::Malformed(format!("unsupported version {version}")));
    }
    let orbit = OrbitId::from_index(bytes[20])
        .ok_or_else(|| RenderError::Malformed(format!("bad orbit id {}", bytes[20])))?;
    Ok(PcvHeader {
        width: u32_at(bytes, 8),
        height: u32_at(bytes, 12),
        frame_count: u32_at(bytes, 16),
        orbit,
    })
}

pub fn decode_sequence(bytes: &[u8]) -> Result<VideoSequence> {
    let h = parse_header(bytes)?;
    let (w, ht, n) = (h.width as usize, h.height as usize, h.frame_count as usize);
    if w == 0 || ht == 0 || n == 0 {
        return Err(RenderError::Malformed(format!("empty geometry {w}x{ht}x{n}")));
    }
    let frame_len = w * ht * 3;
    let expected = HEADER_LEN + frame_len * n;
    if bytes.len() < expected {
        return Err(RenderError::TruncatedFile { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(RenderError::Malformed(format!("{} trailing bytes", bytes.len() - expected)));
    }
    let frames = bytes[HEADER_LEN..]
        .chunks_exact(frame_len)
        .map(|c| Frame::from_pixels(w, ht, c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    VideoSequence::new(h.orbit, frames)
}

pub fn save_sequence(seq: &VideoSequence, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_sequence(seq))?;
    Ok(())
}

pub fn load_sequence(path: impl AsRef<Path>) -> Result<VideoSequence> {
    decode_sequence(&std::fs::read(path)?)
}

/// Reads only the header and checks the file length it implies.
pub fn read_sequence_header(path: impl AsRef<Path>) -> Result<PcvHeader> {
    use std::io::Read;
    let mut file = std::fs::File::open(path)?;
    let mut buf = [0u8; HEADER_LEN];
    let got = file.read(&mut buf)?;
    let h = parse_header(&buf[..got])?;
    let expected = HEADER_LEN as u64 + h.width as u64 * h.height as u64 * 3 * h.frame_count as u64;
    let actual = file.metadata()?.len();
    if actual != expected {
        return Err(RenderError::TruncatedFile { expected: expected as usize, found: actual as usize });
    }
    Ok(h)
}

/// Reads the listed frames without loading the whole file.
pub fn load_frames(path: impl AsRef<Path>, indices: &[usize]) -> Result<(PcvHeader, Vec<Frame>)> {
    use std::io::{Read, Seek, SeekFrom};
    let path = path.as_ref();
    let h = read_sequence_header(path)?;
    let (w, ht) = (h.width as usize, h.height as usize);
    let frame_len = w * ht * 3;
    let mut file = std::fs::File::open(path)?;
    let mut frames = Vec::with_capacity(indices.len());
    for &i in indices {
        if i >= h.frame_count as usize {
            return Err(RenderError::Malformed(format!("frame {i} of {}", h.frame_count)));
        }
        file.seek(SeekFrom::Start((HEADER_LEN + i * frame_len) as u64))?;
        let mut buf = vec![0u8; frame_len];
        file.read_exact(&mut buf)?;
        frames.push(Frame::from_pixels(w, ht, buf)?);
    }
    Ok((h, frames))
}
