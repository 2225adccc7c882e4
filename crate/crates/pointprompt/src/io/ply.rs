//! PLY point clouds: vertex x/y/z plus optional red/green/blue.

use std::fs;
use std::io::Write;
use std::path::Path;

use pointprompt_core::cloud::{CloudError, PointCloud};
use pointprompt_core::segmentation::UNLABELED;
use pointprompt_core::synthetic::instance_color;
use thiserror::Error;

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlyError {
    #[error("malformed PLY: {0}")]
    Malformed(String),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Header {
    format: PlyFormat,
    count: usize,
    props: Vec<(String, Scalar)>,
    body_start: usize,
}

fn malformed(msg: impl Into<String>) -> PlyError {
    PlyError::Malformed(msg.into())
}

fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    const END: &[u8] = b"end_header";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| malformed("missing end_header"))?;
    let mut body_start = end + END.len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) != Some(&b'\n') {
        return Err(malformed("end_header must end its line"));
    }
    body_start += 1;
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| malformed("header is not UTF-8"))?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some("ply") {
        return Err(malformed("missing 'ply' magic"));
    }
    let mut format = None;
    let mut count = None;
    let mut props = Vec::new();
    let mut in_vertex = false;
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", f, "1.0"] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(malformed(format!("unsupported format {other}"))),
                })
            }
            ["element", name, n] => {
                if count.is_some() {
                    // Elements after the vertices are ignored.
                    in_vertex = false;
                    continue;
                }
                if *name != "vertex" {
                    return Err(malformed("the vertex element must come first"));
                }
                count = Some(
                    n.parse::<usize>()
                        .map_err(|_| malformed("bad vertex count"))?,
                );
                in_vertex = true;
            }
            ["property", "list", ..] if in_vertex => {
                return Err(malformed("list property on vertex"))
            }
            ["property", ty, name] if in_vertex => {
                let s = Scalar::parse(ty).ok_or_else(|| malformed(format!("unknown type {ty}")))?;
                props.push((name.to_string(), s));
            }
            ["property", ..] => {}
            _ => return Err(malformed(format!("unexpected header line '{line}'"))),
        }
    }
    Ok(Header {
        format: format.ok_or_else(|| malformed("missing format line"))?,
        count: count.ok_or_else(|| malformed("missing vertex element"))?,
        props,
        body_start,
    })
}

/// Parses PLY bytes.
pub fn parse_ply(bytes: &[u8]) -> Result<PointCloud, PlyError> {
    let h = parse_header(bytes)?;
    let find = |n: &str| h.props.iter().position(|(p, _)| p == n);
    let (Some(ix), Some(iy), Some(iz)) = (find("x"), find("y"), find("z")) else {
        return Err(malformed("vertex needs x, y and z"));
    };
    let rgb = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        (None, None, None) => None,
        _ => return Err(malformed("incomplete color properties")),
    };
    let mut values = vec![0f64; h.props.len()];
    let mut positions = Vec::with_capacity(h.count);
    let mut colors = rgb.map(|_| Vec::with_capacity(h.count));
    let body = &bytes[h.body_start..];
    let mut push = |values: &[f64]| {
        positions.push([values[ix] as f32, values[iy] as f32, values[iz] as f32]);
        if let (Some(c), Some([r, g, b])) = (colors.as_mut(), rgb) {
            c.push([values[r] as u8, values[g] as u8, values[b] as u8]);
        }
    };
    match h.format {
        PlyFormat::BinaryLittleEndian => {
            let stride: usize = h.props.iter().map(|(_, s)| s.size()).sum();
            if body.len() < stride * h.count {
                return Err(malformed("truncated vertex data"));
            }
            for row in body.chunks_exact(stride).take(h.count) {
                let mut off = 0;
                for (v, (_, s)) in values.iter_mut().zip(&h.props) {
                    *v = s.read_le(&row[off..]);
                    off += s.size();
                }
                push(&values);
            }
        }
        PlyFormat::Ascii => {
            let text =
                std::str::from_utf8(body).map_err(|_| malformed("ASCII body is not UTF-8"))?;
            let mut rows = text.lines().filter(|l| !l.trim().is_empty());
            for _ in 0..h.count {
                let row = rows
                    .next()
                    .ok_or_else(|| malformed("truncated vertex data"))?;
                let mut tok = row.split_whitespace();
                for v in values.iter_mut() {
                    let t = tok.next().ok_or_else(|| malformed("short vertex row"))?;
                    *v = t
                        .parse::<f64>()
                        .map_err(|_| malformed(format!("bad number '{t}'")))?;
                }
                push(&values);
            }
        }
    }
    Ok(PointCloud::new(positions, colors)?)
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).at(path)?;
    parse_ply(&bytes).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

/// Serializes a cloud; the output depends only on the cloud and format.
pub fn encode_ply(cloud: &PointCloud, format: PlyFormat) -> Vec<u8> {
    let mut out = Vec::new();
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let _ = write!(
        out,
        "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        cloud.len()
    );
    if cloud.colors().is_some() {
        out.extend_from_slice(b"property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    out.extend_from_slice(b"end_header\n");
    for (i, p) in cloud.positions().iter().enumerate() {
        let c = cloud.colors().map(|c| c[i]);
        match format {
            PlyFormat::BinaryLittleEndian => {
                for v in p {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                if let Some(c) = c {
                    out.extend_from_slice(&c);
                }
            }
            PlyFormat::Ascii => {
                // `Display` for f32 prints the shortest exact representation.
                let _ = write!(out, "{} {} {}", p[0], p[1], p[2]);
                if let Some(c) = c {
                    let _ = write!(out, " {} {} {}", c[0], c[1], c[2]);
                }
                out.push(b'\n');
            }
        }
    }
    out
}

pub fn write_ply(path: &Path, cloud: &PointCloud, format: PlyFormat) -> Result<()> {
    fs::write(path, encode_ply(cloud, format)).at(path)
}

/// Color of a label in exported clouds; unlabeled points are gray.
pub fn label_color(label: u32) -> [u8; 3] {
    if label == UNLABELED {
        [128, 128, 128]
    } else {
        instance_color(label)
    }
}

/// Writes the cloud colored by instance label.
pub fn write_labeled_ply(
    path: &Path,
    cloud: &PointCloud,
    labels: &[u32],
    format: PlyFormat,
) -> Result<()> {
    if labels.len() != cloud.len() {
        return Err(Error::data(format!(
            "{} labels for a cloud of {} points",
            labels.len(),
            cloud.len()
        )));
    }
    let colors = labels.iter().map(|&l| label_color(l)).collect();
    let colored = PointCloud::new(cloud.positions().to_vec(), Some(colors)).map_err(Error::data)?;
    write_ply(path, &colored, format)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_vertex() {
        let c = parse_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n").unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn nan_rejected() {
        let r = parse_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 nan 0\n");
        assert!(matches!(
            r,
            Err(PlyError::Cloud(CloudError::NonFiniteCoordinate { .. }))
        ));
    }

    #[test]
    fn empty_rejected() {
        let r = parse_ply(b"ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n");
        assert!(matches!(r, Err(PlyError::Cloud(CloudError::EmptyCloud))));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_ply(b"plx\n"), Err(PlyError::Malformed(_))));
        let no_z = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n0 0\n";
        assert!(matches!(parse_ply(no_z), Err(PlyError::Malformed(_))));
        let short = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n\0\0\0\0";
        assert!(matches!(parse_ply(short), Err(PlyError::Malformed(_))));
    }

    #[test]
    fn double_and_extra_properties() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nproperty float nx\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n".to_vec();
        for v in [1.5f64, -2.0, 3.25] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        let c = parse_ply(&bytes).unwrap();
        assert_eq!(c.positions(), &[[1.5, -2.0, 3.25]]);
    }

    #[test]
    fn round_trips() {
        let pts = vec![[0.1f32, -2.5, 3.0e-7], [1.0 / 3.0, 7.0, -0.0]];
        let cloud = PointCloud::new(pts, Some(vec![[1, 2, 3], [255, 0, 9]])).unwrap();
        for f in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let bytes = encode_ply(&cloud, f);
            let back = parse_ply(&bytes).unwrap();
            assert_eq!(back, cloud);
            assert_eq!(encode_ply(&back, f), bytes);
        }
    }
}
