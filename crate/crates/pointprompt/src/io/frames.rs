//! Camera files: intrinsics, per-frame poses and 16-bit depth images.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use pointprompt_core::camera::{CameraIntrinsics, CameraPose, DepthMap, Frame};

use crate::error::{Error, IoContext, Result};

/// Rigidity tolerance applied to pose files.
pub const POSE_FILE_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_DEPTH_SCALE: f64 = 1000.0;
pub const INTRINSICS_FILE: &str = "intrinsics.txt";

fn numbers(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).at(path)?;
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    if vals.len() != expected {
        return Err(Error::data(format!(
            "{}: expected {expected} numbers, found {}",
            path.display(),
            vals.len()
        )));
    }
    Ok(vals)
}

/// `fx fy cx cy width height`.
pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let v = numbers(path, 6)?;
    let dim = |x: f64| {
        if x >= 1.0 && x.fract() == 0.0 && x <= u16::MAX as f64 {
            Ok(x as u32)
        } else {
            Err(Error::data(format!(
                "{}: bad image size {x}",
                path.display()
            )))
        }
    };
    CameraIntrinsics::new(v[0], v[1], v[2], v[3], dim(v[4])?, dim(v[5])?)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

pub fn write_intrinsics(path: &Path, k: &CameraIntrinsics) -> Result<()> {
    let text = format!(
        "{} {} {} {} {} {}\n",
        k.fx, k.fy, k.cx, k.cy, k.width, k.height
    );
    fs::write(path, text).at(path)
}

/// Sixteen numbers, row-major world-to-camera.
pub fn read_pose(path: &Path) -> Result<CameraPose> {
    let v = numbers(path, 16)?;
    let mut m = [[0.0; 4]; 4];
    for (i, x) in v.into_iter().enumerate() {
        m[i / 4][i % 4] = x;
    }
    CameraPose::from_matrix(&m, POSE_FILE_TOLERANCE)
        .map_err(|e| Error::data(format!("{}: bad transform: {e}", path.display())))
}

pub fn write_pose(path: &Path, pose: &CameraPose) -> Result<()> {
    let mut text = String::new();
    for row in pose.to_matrix() {
        let r: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        text.push_str(&r.join(" "));
        text.push('\n');
    }
    fs::write(path, text).at(path)
}

fn quantize(d: f32, scale: f64) -> u16 {
    if d.is_nan() || d <= 0.0 {
        return 0;
    }
    (d as f64 * scale).round().clamp(0.0, u16::MAX as f64) as u16
}

/// Writes depth as a 16-bit grayscale PNG of `meters × scale`.
pub fn write_depth_png(path: &Path, depth: &DepthMap, scale: f64) -> Result<()> {
    let file = fs::File::create(path).at(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), depth.width(), depth.height());
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Sixteen);
    let mut w = enc
        .write_header()
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let mut data = Vec::with_capacity(depth.data().len() * 2);
    for &d in depth.data() {
        data.extend_from_slice(&quantize(d, scale).to_be_bytes());
    }
    w.write_image_data(&data)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

/// Writes depth as a binary 16-bit PGM (big-endian samples).
pub fn write_depth_pgm(path: &Path, depth: &DepthMap, scale: f64) -> Result<()> {
    let mut out = format!("P5\n{} {}\n65535\n", depth.width(), depth.height()).into_bytes();
    for &d in depth.data() {
        out.extend_from_slice(&quantize(d, scale).to_be_bytes());
    }
    fs::write(path, out).at(path)
}

fn depth_from_u16(w: u32, h: u32, raw: impl Iterator<Item = u16>, scale: f64) -> Result<DepthMap> {
    let data = raw.map(|v| (v as f64 / scale) as f32).collect();
    DepthMap::new(w, h, data).map_err(Error::data)
}

fn read_depth_png(path: &Path, scale: f64) -> Result<DepthMap> {
    let bad = |e: &dyn std::fmt::Display| Error::data(format!("{}: {e}", path.display()));
    let file = fs::File::open(path).at(path)?;
    let mut reader = png::Decoder::new(std::io::BufReader::new(file))
        .read_info()
        .map_err(|e| bad(&e))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(bad(&"depth PNG must be 16-bit grayscale"));
    }
    let (w, h) = (info.width, info.height);
    let mut buf = vec![
        0u8;
        reader
            .output_buffer_size()
            .ok_or_else(|| bad(&"image too large"))?
    ];
    let frame = reader.next_frame(&mut buf).map_err(|e| bad(&e))?;
    let bytes = &buf[..frame.buffer_size()];
    depth_from_u16(
        w,
        h,
        bytes
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]])),
        scale,
    )
}

fn read_depth_pgm(path: &Path, scale: f64) -> Result<DepthMap> {
    let bytes = fs::read(path).at(path)?;
    let bad = |m: &str| Error::data(format!("{}: {m}", path.display()));
    // Header: magic, width, height, maxval, each separated by whitespace
    // (comments allowed), then exactly one whitespace byte.
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(bad("truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    i += 1;
    if fields[0] != "P5" {
        return Err(bad("not a binary PGM"));
    }
    let parse = |s: &str| s.parse::<u32>().map_err(|_| bad("bad PGM header number"));
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if !(256..=65535).contains(&maxval) {
        return Err(bad("depth PGM must be 16-bit"));
    }
    let need = w as usize * h as usize * 2;
    let body = bytes
        .get(i..i + need)
        .ok_or_else(|| bad("truncated PGM data"))?;
    depth_from_u16(
        w,
        h,
        body.chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]])),
        scale,
    )
}

/// Reads `.png` or `.pgm` depth, dividing raw values by `scale`.
pub fn read_depth(path: &Path, scale: f64) -> Result<DepthMap> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => read_depth_png(path, scale),
        Some("pgm") => read_depth_pgm(path, scale),
        _ => Err(Error::data(format!(
            "{}: unknown depth format",
            path.display()
        ))),
    }
}

/// Frame ids found as `<id>.pose.txt` and `<id>.depth.{png,pgm}`.
struct FrameFiles {
    poses: BTreeMap<u32, PathBuf>,
    depths: BTreeMap<u32, PathBuf>,
}

fn frame_id(name: &str, suffix: &str) -> Option<u32> {
    name.strip_suffix(suffix)?.parse().ok()
}

fn scan(dir: &Path) -> Result<FrameFiles> {
    let mut f = FrameFiles {
        poses: BTreeMap::new(),
        depths: BTreeMap::new(),
    };
    for entry in fs::read_dir(dir).at(dir)? {
        let path = entry.at(dir)?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(id) = frame_id(name, ".pose.txt") {
            f.poses.insert(id, path);
        } else if let Some(id) =
            frame_id(name, ".depth.png").or_else(|| frame_id(name, ".depth.pgm"))
        {
            f.depths.entry(id).or_insert(path);
        }
    }
    Ok(f)
}

/// Loads frames whose id is a multiple of `stride`, ascending. Intrinsics are
/// rescaled when the depth images have a different size than declared.
pub fn load_frame_manifest(dir: &Path, stride: u32, depth_scale: f64) -> Result<Vec<Frame>> {
    if stride == 0 {
        return Err(Error::config("frame stride must be positive"));
    }
    let intrinsics = read_intrinsics(&dir.join(INTRINSICS_FILE))?;
    let files = scan(dir)?;
    if let Some(id) = files.depths.keys().find(|id| !files.poses.contains_key(id)) {
        return Err(Error::data(format!("frame {id}: missing pose")));
    }
    let ids: Vec<u32> = files
        .poses
        .keys()
        .copied()
        .filter(|id| id % stride == 0)
        .collect();
    let load = |id: u32| -> Result<Frame> {
        let pose = read_pose(&files.poses[&id])?;
        let depth_path = files
            .depths
            .get(&id)
            .ok_or_else(|| Error::data(format!("frame {id}: missing depth")))?;
        let depth = read_depth(depth_path, depth_scale)?;
        let k = if (depth.width(), depth.height()) == (intrinsics.width, intrinsics.height) {
            intrinsics
        } else {
            intrinsics.rescaled(depth.width(), depth.height())
        };
        Frame::new(id, k, pose, depth).map_err(|e| Error::data(format!("frame {id}: {e}")))
    };
    use rayon::prelude::*;
    ids.par_iter().map(|&id| load(id)).collect()
}

/// Writes one frame's pose and depth PNG into `dir`.
pub fn write_frame(dir: &Path, frame: &Frame, depth_scale: f64) -> Result<()> {
    write_pose(&dir.join(format!("{}.pose.txt", frame.id)), &frame.pose)?;
    write_depth_png(
        &dir.join(format!("{}.depth.png", frame.id)),
        &frame.depth,
        depth_scale,
    )
}

pub fn write_depth_pgm_frame(dir: &Path, frame: &Frame, depth_scale: f64) -> Result<()> {
    write_depth_pgm(
        &dir.join(format!("{}.depth.pgm", frame.id)),
        &frame.depth,
        depth_scale,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_round_trip_and_reflection() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("0.pose.txt");
        let pose = CameraPose::look_at(
            nalgebra::Vector3::new(1.0, 2.0, 3.0),
            nalgebra::Vector3::zeros(),
            nalgebra::Vector3::z(),
        )
        .unwrap();
        write_pose(&p, &pose).unwrap();
        assert_eq!(read_pose(&p).unwrap(), pose);
        fs::write(&p, "-1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n").unwrap();
        assert!(matches!(read_pose(&p), Err(Error::Data(_))));
    }

    #[test]
    fn depth_png_and_pgm_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<f32> = (0..12).map(|i| i as f32 * 0.3337).collect();
        let depth = DepthMap::new(4, 3, data.clone()).unwrap();
        for name in ["d.png", "d.pgm"] {
            let p = dir.path().join(name);
            if name.ends_with("png") {
                write_depth_png(&p, &depth, 1000.0).unwrap();
            } else {
                write_depth_pgm(&p, &depth, 1000.0).unwrap();
            }
            let back = read_depth(&p, 1000.0).unwrap();
            assert_eq!((back.width(), back.height()), (4, 3));
            for (a, b) in back.data().iter().zip(&data) {
                assert!((a - b).abs() <= 0.0005 + 1e-6);
            }
        }
    }
}
