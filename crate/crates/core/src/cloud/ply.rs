//! A deliberately small PLY subset: one `vertex` element with float
//! `x/y/z` and optional `uchar` `r/g/b` (or `red/green/blue`), stored as
//! `ascii 1.0` or `binary_little_endian 1.0`. Anything else is rejected.

use std::io::Write;
use std::path::Path;

use super::{CloudError, PointCloud, Result, Vec3, DEFAULT_COLOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    F32,
    F64,
    U8,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "float" | "float32" => Some(Self::F32),
            "double" | "float64" => Some(Self::F64),
            "uchar" | "uint8" => Some(Self::U8),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            Self::F32 => 4,
            Self::F64 => 8,
            Self::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    X,
    Y,
    Z,
    R,
    G,
    B,
}

struct Header {
    format: PlyFormat,
    vertex_count: usize,
    properties: Vec<(Slot, ScalarType)>,
    has_color: bool,
    body_offset: usize,
}

fn header_error(msg: impl Into<String>) -> CloudError {
    CloudError::MalformedHeader(msg.into())
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut offset = 0;
    let next_line = |offset: &mut usize| -> Option<String> {
        if *offset >= bytes.len() {
            return None;
        }
        let rest = &bytes[*offset..];
        let end = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
        *offset += (end + 1).min(rest.len());
        Some(String::from_utf8_lossy(&rest[..end]).trim_end_matches('\r').to_string())
    };

    match next_line(&mut offset) {
        Some(l) if l.trim() == "ply" => {}
        _ => return Err(header_error("missing 'ply' magic line")),
    }

    let mut format = None;
    let mut vertex_count = None;
    let mut properties: Vec<(Slot, ScalarType)> = Vec::new();
    let mut in_vertex = false;
    loop {
        let Some(line) = next_line(&mut offset) else {
            return Err(header_error("missing 'end_header'"));
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", kind, version] => {
                if *version != "1.0" {
                    return Err(header_error(format!("unsupported version {version}")));
                }
                format = Some(match *kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(header_error(format!("unknown format '{other}'"))),
                });
            }
            ["format", ..] => return Err(header_error(format!("bad format line '{line}'"))),
            ["element", name, count] => {
                if *name != "vertex" {
                    return Err(CloudError::UnsupportedElement(name.to_string()));
                }
                if vertex_count.is_some() {
                    return Err(header_error("duplicate vertex element"));
                }
                let n = count
                    .parse::<usize>()
                    .map_err(|_| header_error(format!("bad vertex count '{count}'")))?;
                vertex_count = Some(n);
                in_vertex = true;
            }
            ["property", "list", ..] => {
                return Err(CloudError::UnsupportedProperty(format!("list property: '{line}'")))
            }
            ["property", ty, name] => {
                if !in_vertex {
                    return Err(header_error("property before any element"));
                }
                let ty = ScalarType::parse(ty)
                    .ok_or_else(|| CloudError::UnsupportedProperty(format!("type '{ty}' of '{name}'")))?;
                let slot = match *name {
                    "x" => Slot::X,
                    "y" => Slot::Y,
                    "z" => Slot::Z,
                    "r" | "red" => Slot::R,
                    "g" | "green" => Slot::G,
                    "b" | "blue" => Slot::B,
                    other => return Err(CloudError::UnsupportedProperty(other.to_string())),
                };
                let is_coord = matches!(slot, Slot::X | Slot::Y | Slot::Z);
                if is_coord && ty == ScalarType::U8 || !is_coord && ty != ScalarType::U8 {
                    return Err(CloudError::UnsupportedProperty(format!("'{name}' with type {ty:?}")));
                }
                if properties.iter().any(|(s, _)| *s == slot) {
                    return Err(header_error(format!("duplicate property '{name}'")));
                }
                properties.push((slot, ty));
            }
            ["end_header"] => break,
            _ => return Err(header_error(format!("unrecognized header line '{line}'"))),
        }
    }

    let format = format.ok_or_else(|| header_error("missing format line"))?;
    let vertex_count = vertex_count.ok_or_else(|| header_error("missing vertex element"))?;
    let has = |s: Slot| properties.iter().any(|(p, _)| *p == s);
    if !(has(Slot::X) && has(Slot::Y) && has(Slot::Z)) {
        return Err(header_error("vertex element lacks x/y/z"));
    }
    let colors = [Slot::R, Slot::G, Slot::B].iter().filter(|&&s| has(s)).count();
    if colors != 0 && colors != 3 {
        return Err(CloudError::UnsupportedProperty("partial color channels".into()));
    }
    Ok(Header {
        format,
        vertex_count,
        properties,
        has_color: colors == 3,
        body_offset: offset,
    })
}

#[derive(Default)]
struct VertexBuilder {
    xyz: [f64; 3],
    rgb: [u8; 3],
}

impl VertexBuilder {
    fn set_coord(&mut self, slot: Slot, v: f64) {
        match slot {
            Slot::X => self.xyz[0] = v,
            Slot::Y => self.xyz[1] = v,
            Slot::Z => self.xyz[2] = v,
            _ => unreachable!(),
        }
    }

    fn set_color(&mut self, slot: Slot, v: u8) {
        match slot {
            Slot::R => self.rgb[0] = v,
            Slot::G => self.rgb[1] = v,
            Slot::B => self.rgb[2] = v,
            _ => unreachable!(),
        }
    }
}

/// Parses an in-memory PLY file.
pub fn parse_ply(bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(bytes)?;
    let body = &bytes[header.body_offset..];
    let n = header.vertex_count;
    let mut points = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);

    match header.format {
        PlyFormat::Ascii => {
            let text = String::from_utf8_lossy(body);
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            for vertex in 0..n {
                let Some(line) = lines.next() else {
                    return Err(CloudError::CountMismatch { declared: n, found: vertex });
                };
                let tokens: Vec<&str> = line.split_whitespace().collect();
                if tokens.len() != header.properties.len() {
                    return Err(CloudError::MalformedBody {
                        vertex,
                        reason: format!("expected {} values, got {}", header.properties.len(), tokens.len()),
                    });
                }
                let mut v = VertexBuilder { rgb: DEFAULT_COLOR, ..Default::default() };
                for (&(slot, ty), tok) in header.properties.iter().zip(&tokens) {
                    let bad = || CloudError::MalformedBody { vertex, reason: format!("bad value '{tok}'") };
                    match ty {
                        ScalarType::U8 => v.set_color(slot, tok.parse().map_err(|_| bad())?),
                        ScalarType::F32 => v.set_coord(slot, tok.parse::<f32>().map_err(|_| bad())? as f64),
                        ScalarType::F64 => v.set_coord(slot, tok.parse::<f64>().map_err(|_| bad())?),
                    }
                }
                points.push(Vec3::from(v.xyz));
                colors.push(v.rgb);
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let stride: usize = header.properties.iter().map(|(_, t)| t.size()).sum();
            let available = body.len() / stride;
            if available < n {
                return Err(CloudError::CountMismatch { declared: n, found: available });
            }
            for record in body.chunks_exact(stride).take(n) {
                let mut v = VertexBuilder { rgb: DEFAULT_COLOR, ..Default::default() };
                let mut at = 0;
                for &(slot, ty) in &header.properties {
                    let raw = &record[at..at + ty.size()];
                    match ty {
                        ScalarType::U8 => v.set_color(slot, raw[0]),
                        ScalarType::F32 => {
                            v.set_coord(slot, f32::from_le_bytes(raw.try_into().unwrap()) as f64)
                        }
                        ScalarType::F64 => v.set_coord(slot, f64::from_le_bytes(raw.try_into().unwrap())),
                    }
                    at += ty.size();
                }
                points.push(Vec3::from(v.xyz));
                colors.push(v.rgb);
            }
        }
    }
    debug_assert!(header.has_color || colors.iter().all(|c| *c == DEFAULT_COLOR));
    PointCloud::new(points, colors)
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    parse_ply(&std::fs::read(path)?)
}

/// Serializes with `double` coordinates and `uchar` colors so the output
/// re-parses to exactly the same cloud.
pub fn write_ply(cloud: &PointCloud, format: PlyFormat) -> Vec<u8> {
    let mut out = Vec::new();
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let _ = write!(
        out,
        "ply\nformat {fmt} 1.0\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        cloud.len()
    );
    for (p, c) in cloud.points().iter().zip(cloud.colors()) {
        match format {
            // `Display` for f64 prints the shortest string that round-trips.
            PlyFormat::Ascii => {
                let _ = writeln!(out, "{} {} {} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2]);
            }
            PlyFormat::BinaryLittleEndian => {
                for v in p.to_array() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend_from_slice(c);
            }
        }
    }
    out
}

pub fn write_ply_file(cloud: &PointCloud, format: PlyFormat, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_ply(cloud, format))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    #[test]
    fn single_ascii_vertex() {
        let src = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n\
property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n0 0 0 255 0 0\n";
        let c = parse_ply(src).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.points()[0], Vec3::ZERO);
        assert_eq!(c.colors()[0], [255, 0, 0]);
    }

    #[test]
    fn property_order_is_honored() {
        let src = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty uchar b\nproperty float z\n\
property uchar r\nproperty float x\nproperty uchar g\nproperty float y\nend_header\n3 30 1 10 2 20\n";
        let c = parse_ply(src).unwrap();
        assert_eq!(c.points()[0], Vec3::new(10.0, 20.0, 30.0));
        assert_eq!(c.colors()[0], [1, 2, 3]);
    }

    #[test]
    fn missing_colors_default_to_gray() {
        let src = b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n\
property float z\nend_header\n1 2 3\n4 5 6\n";
        let c = parse_ply(src).unwrap();
        assert_eq!(c.colors(), &[DEFAULT_COLOR, DEFAULT_COLOR]);
    }

    /// Bytes laid out by hand: header text, then per vertex three
    /// little-endian IEEE-754 binary32 values (12 bytes each record).
    #[test]
    fn hand_built_binary_le() {
        let mut bytes = b"ply\r\nformat binary_little_endian 1.0\r\ncomment hand made\r\nelement vertex 3\r\n\
property float x\r\nproperty float y\r\nproperty float z\r\nend_header\n"
            .to_vec();
        // 1.0f32 = 0x3F800000, 2.0 = 0x40000000, 3.0 = 0x40400000, 4.0 = 0x40800000,
        // 5.0 = 0x40A00000, 6.0 = 0x40C00000, 7.0 = 0x40E00000, 8.0 = 0x41000000, 9.0 = 0x41100000
        let words: [u32; 9] = [
            0x3F80_0000, 0x4000_0000, 0x4040_0000, 0x4080_0000, 0x40A0_0000, 0x40C0_0000, 0x40E0_0000,
            0x4100_0000, 0x4110_0000,
        ];
        for w in words {
            bytes.extend_from_slice(&[w as u8, (w >> 8) as u8, (w >> 16) as u8, (w >> 24) as u8]);
        }
        let c = parse_ply(&bytes).unwrap();
        assert_eq!(
            c.points(),
            &[Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0), Vec3::new(7.0, 8.0, 9.0)]
        );
    }

    #[test]
    fn one_point_ascii_body_line() {
        let c = PointCloud::from_points(vec![Vec3::ZERO]).unwrap();
        let text = String::from_utf8(write_ply(&c, PlyFormat::Ascii)).unwrap();
        assert_eq!(text.lines().last().unwrap(), "0 0 0 128 128 128");
        assert!(text.contains("property double x"));
    }

    #[test]
    fn header_errors() {
        assert!(matches!(parse_ply(b"plx\n"), Err(CloudError::MalformedHeader(_))));
        assert!(matches!(
            parse_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"),
            Err(CloudError::MalformedHeader(_))
        ));
        assert!(matches!(
            parse_ply(b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n"),
            Err(CloudError::MalformedHeader(_))
        ));
        assert!(matches!(
            parse_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty list uchar int vertex_indices\nend_header\n"),
            Err(CloudError::UnsupportedProperty(_))
        ));
        assert!(matches!(
            parse_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nelement face 0\nend_header\n0 0 0\n"),
            Err(CloudError::UnsupportedElement(_))
        ));
        assert!(matches!(
            parse_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nproperty float nx\nend_header\n"),
            Err(CloudError::UnsupportedProperty(_))
        ));
    }

    #[test]
    fn short_bodies_are_count_mismatches() {
        let ascii = b"ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 1 1\n";
        assert!(matches!(parse_ply(ascii), Err(CloudError::CountMismatch { declared: 3, found: 2 })));
        let mut bin = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
        bin.extend_from_slice(&[0u8; 20]);
        assert!(matches!(parse_ply(&bin), Err(CloudError::CountMismatch { declared: 2, found: 1 })));
    }

    fn random_cloud(seed: u64, n: usize) -> PointCloud {
        let mut r = Rng::new(seed);
        let mut pts = Vec::new();
        let mut cols = Vec::new();
        for _ in 0..n {
            pts.push(Vec3::new(r.gaussian() * 1e3, r.gaussian() * 1e-7, r.next_f64()));
            cols.push([r.below(256) as u8, r.below(256) as u8, r.below(256) as u8]);
        }
        PointCloud::new(pts, cols).unwrap()
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(seed in any::<u64>(), n in 0usize..40) {
            let c = random_cloud(seed, n);
            for fmt in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
                prop_assert_eq!(&parse_ply(&write_ply(&c, fmt)).unwrap(), &c);
            }
        }
    }
}
