//! File formats: golden mask archives, prompt exports and round trips of
//! every reader/writer pair.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use pointprompt::io::frames::{
    read_depth, read_intrinsics, read_pose, write_depth_pgm, write_depth_png, write_intrinsics,
    write_pose,
};
use pointprompt::io::labels::{decode_labels, encode_labels, read_labels, write_labels};
use pointprompt::io::masks::{
    decode_frame_archive, encode_frame_archive, read_archive_dir, write_archive_dir, MASKS_MAGIC,
};
use pointprompt::io::ply::{encode_ply, parse_ply, read_ply, write_ply, PlyFormat};
use pointprompt::io::prompts::{read_prompt_dir, write_prompt_export};
use pointprompt::io::raster::{decode_raster, encode_raster};
use pointprompt_core::camera::{CameraIntrinsics, CameraPose, DepthMap};
use pointprompt_core::cloud::PointCloud;
use pointprompt_core::mask::{BBox, MaskRecord};
use pointprompt_core::segmentation::UNLABELED;
use pointprompt_core::synthetic::InstanceRaster;

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

#[test]
fn golden_archives_decode_to_known_records() {
    let bytes = fs::read(golden().join("0.masks.bin")).unwrap();
    assert_eq!(&bytes[..4], MASKS_MAGIC);
    let (w, h, recs) = decode_frame_archive(0, &bytes).unwrap();
    assert_eq!((w, h), (6, 4));
    assert_eq!(recs.len(), 2);
    let a = &recs[0];
    assert_eq!((a.frame_id, a.prompt_id), (0, 3));
    assert_eq!(a.bbox, BBox::from_array([1, 1, 2, 2]));
    assert_eq!((a.predicted_iou, a.stability), (95.5, 98.25));
    assert_eq!(a.mask.runs(), &[7, 2, 4, 2, 9]);
    let set: Vec<(u32, u32)> = (0..4)
        .flat_map(|v| (0..6).map(move |u| (u, v)))
        .filter(|&(u, v)| a.mask.contains(u, v))
        .collect();
    assert_eq!(set, vec![(1, 1), (2, 1), (1, 2), (2, 2)]);
    let b = &recs[1];
    assert_eq!(b.prompt_id, 7);
    assert_eq!(b.bbox, BBox::from_array([0, 3, 5, 3]));
    assert_eq!(b.mask.area(), 6);

    let (_, _, empty) =
        decode_frame_archive(1, &fs::read(golden().join("1.masks.bin")).unwrap()).unwrap();
    assert!(empty.is_empty());
}

#[test]
fn golden_archives_re_encode_byte_for_byte() {
    for id in 0..3 {
        let bytes = fs::read(golden().join(format!("{id}.masks.bin"))).unwrap();
        let (w, h, recs) = decode_frame_archive(id, &bytes).unwrap();
        assert_eq!(
            encode_frame_archive(w, h, &recs).unwrap(),
            bytes,
            "frame {id}"
        );
    }
}

#[test]
fn golden_directory_round_trips_through_the_writer() {
    let (manifest, archive) = read_archive_dir(&golden()).unwrap();
    assert_eq!(manifest.provider, "golden");
    assert_eq!(manifest.frame_ids, vec![0, 1, 2]);
    assert_eq!(archive.record_count(), 3);
    let out = tempfile::tempdir().unwrap();
    write_archive_dir(out.path(), &archive, &manifest.provider).unwrap();
    for name in ["0.masks.bin", "1.masks.bin", "2.masks.bin", "masks.json"] {
        assert_eq!(
            fs::read(out.path().join(name)).unwrap(),
            fs::read(golden().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn corrupt_archives_are_rejected() {
    let bytes = fs::read(golden().join("0.masks.bin")).unwrap();
    // Truncation, bad magic and a run overrun fail to decode.
    assert!(decode_frame_archive(0, &bytes[..bytes.len() - 1]).is_err());
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(decode_frame_archive(0, &magic).is_err());
    let mut overrun = bytes.clone();
    let last = overrun.len() - 4;
    overrun[last..].copy_from_slice(&7u32.to_le_bytes());
    assert!(decode_frame_archive(0, &overrun).is_err());
    let mut bbox = bytes.clone();
    bbox[20..22].copy_from_slice(&0u16.to_le_bytes());
    // A loose bbox decodes but fails the record check the provider contract runs.
    let (_, _, recs) = decode_frame_archive(0, &bbox).unwrap();
    assert!(recs[0].validate().is_err());
    assert!(recs[1].validate().is_ok());
}

#[test]
fn prompt_exports_round_trip_identically() {
    let exports = read_prompt_dir(&golden()).unwrap();
    assert_eq!(
        exports.iter().map(|e| e.frame_id).collect::<Vec<_>>(),
        vec![0, 1, 2]
    );
    let out = tempfile::tempdir().unwrap();
    for e in &exports {
        write_prompt_export(out.path(), e).unwrap();
        let name = format!("{}.prompts.json", e.frame_id);
        assert_eq!(
            fs::read(out.path().join(&name)).unwrap(),
            fs::read(golden().join(&name)).unwrap()
        );
    }
    assert_eq!(read_prompt_dir(out.path()).unwrap(), exports);
}

#[test]
fn golden_records_contain_their_prompts() {
    let (_, archive) = read_archive_dir(&golden()).unwrap();
    for e in read_prompt_dir(&golden()).unwrap() {
        for p in &e.prompts {
            if let Some(r) = archive.record(e.frame_id, p.id) {
                assert!(
                    r.contains_pixel(p.u as i32, p.v as i32),
                    "frame {} prompt {}",
                    e.frame_id,
                    p.id
                );
            }
        }
    }
}

#[test]
fn labels_round_trip() {
    let labels = vec![0, 7, UNLABELED, 3, 3];
    let bytes = encode_labels(&labels);
    assert_eq!(&bytes[..4], b"SP3D");
    assert_eq!(bytes.len(), 12 + 4 * labels.len());
    assert_eq!(decode_labels(&bytes).unwrap(), labels);
    assert!(decode_labels(&bytes[..bytes.len() - 2]).is_err());
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("l.bin");
    write_labels(&p, &labels).unwrap();
    assert_eq!(read_labels(&p).unwrap(), labels);
}

#[test]
fn ply_round_trips_in_both_encodings() {
    let cloud = PointCloud::new(
        vec![[0.0, 1.5, -2.25], [1e-3, 3.0, 4.0], [-7.5, 0.0, 0.125]],
        Some(vec![[255, 0, 10], [1, 2, 3], [0, 0, 0]]),
    )
    .unwrap();
    for format in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
        let back = parse_ply(&encode_ply(&cloud, format)).unwrap();
        assert_eq!(back, cloud, "{format:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.ply");
    write_ply(&p, &cloud, PlyFormat::BinaryLittleEndian).unwrap();
    assert_eq!(read_ply(&p).unwrap(), cloud);
}

#[test]
fn camera_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let k = CameraIntrinsics::new(200.0, 210.0, 159.5, 119.5, 320, 240).unwrap();
    write_intrinsics(&dir.path().join("k.txt"), &k).unwrap();
    assert_eq!(read_intrinsics(&dir.path().join("k.txt")).unwrap(), k);

    let rot = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let pose = CameraPose::from_parts(rot, Vector3::new(0.5, -1.25, 3.0), 1e-9).unwrap();
    write_pose(&dir.path().join("p.txt"), &pose).unwrap();
    let back = read_pose(&dir.path().join("p.txt")).unwrap();
    let (a, b) = (pose.to_matrix(), back.to_matrix());
    for r in 0..4 {
        for c in 0..4 {
            assert!((a[r][c] - b[r][c]).abs() < 1e-12);
        }
    }
}

#[test]
fn depth_round_trips_at_millimetre_resolution() {
    let data: Vec<f32> = (0..12)
        .map(|i| {
            if i == 5 {
                0.0
            } else {
                0.25 * i as f32 + 0.0004
            }
        })
        .collect();
    let depth = DepthMap::new(4, 3, data.clone()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for name in ["d.png", "d.pgm"] {
        let p = dir.path().join(name);
        if name.ends_with("png") {
            write_depth_png(&p, &depth, 1000.0).unwrap();
        } else {
            write_depth_pgm(&p, &depth, 1000.0).unwrap();
        }
        let back = read_depth(&p, 1000.0).unwrap();
        assert_eq!((back.width(), back.height()), (4, 3));
        for (x, y) in data.iter().zip(back.data()) {
            assert!((x - y).abs() <= 0.0005 + 1e-6, "{name}: {x} vs {y}");
        }
        assert_eq!(back.get(1, 1), 0.0);
    }
    // PGM samples are big-endian.
    let raw = fs::read(dir.path().join("d.pgm")).unwrap();
    let body = &raw[raw.len() - 24..];
    assert_eq!(u16::from_be_bytes([body[2], body[3]]), 250);
}

#[test]
fn instance_rasters_round_trip() {
    let r = InstanceRaster::new(3, 2, vec![0, 1, 2, u32::MAX, 5, 5]).unwrap();
    let bytes = encode_raster(&r).unwrap();
    assert_eq!(&bytes[..4], b"SPID");
    assert_eq!(bytes.len(), 8 + 6 * 4);
    assert_eq!(decode_raster(&bytes).unwrap(), r);
    assert!(decode_raster(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn record_writer_refuses_mismatched_sizes() {
    let (_, _, recs): (u32, u32, Vec<MaskRecord>) =
        decode_frame_archive(0, &fs::read(golden().join("0.masks.bin")).unwrap()).unwrap();
    assert!(encode_frame_archive(7, 4, &recs).is_err());
}
