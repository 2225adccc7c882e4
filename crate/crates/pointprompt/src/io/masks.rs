//! Mask archives: one `<frame>.masks.bin` per frame plus a `masks.json`
//! manifest.
//!
//! Archive layout (little-endian): "SPMK", u32 version, u16 width, u16 height,
//! u32 record count, then per record: u32 prompt_id, 4 × u16 bbox
//! (u_min, v_min, u_max, v_max), f32 predicted_iou, f32 stability, u32 run
//! count, run count × u32 runs.

use std::fs;
use std::path::Path;

use pointprompt_core::archive::MaskArchive;
use pointprompt_core::mask::{BBox, MaskRecord, Rle};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

pub const MASKS_MAGIC: &[u8; 4] = b"SPMK";
pub const MASKS_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "masks.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MasksManifest {
    pub resolution: Resolution,
    pub prompt_count: u32,
    pub provider: String,
    pub frame_ids: Vec<u32>,
}

pub fn archive_file_name(frame_id: u32) -> String {
    format!("{frame_id}.masks.bin")
}

fn u16_of(v: u32, what: &str) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::data(format!("{what} {v} does not fit in 16 bits")))
}

/// Encodes one frame's records; all masks must be `width × height`.
pub fn encode_frame_archive(width: u32, height: u32, records: &[MaskRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MASKS_MAGIC);
    out.extend_from_slice(&MASKS_VERSION.to_le_bytes());
    out.extend_from_slice(&u16_of(width, "width")?.to_le_bytes());
    out.extend_from_slice(&u16_of(height, "height")?.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        if (r.mask.width(), r.mask.height()) != (width, height) {
            return Err(Error::data(format!(
                "record for prompt {} is {}x{}, archive is {width}x{height}",
                r.prompt_id,
                r.mask.width(),
                r.mask.height()
            )));
        }
        out.extend_from_slice(&r.prompt_id.to_le_bytes());
        for v in [r.bbox.u_min, r.bbox.v_min, r.bbox.u_max, r.bbox.v_max] {
            out.extend_from_slice(&u16_of(v, "bbox coordinate")?.to_le_bytes());
        }
        out.extend_from_slice(&r.predicted_iou.to_le_bytes());
        out.extend_from_slice(&r.stability.to_le_bytes());
        out.extend_from_slice(&(r.mask.runs().len() as u32).to_le_bytes());
        for run in r.mask.runs() {
            out.extend_from_slice(&run.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::data("truncated mask archive"))?;
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Decodes one frame archive into `(width, height, records)`. Structural
/// errors fail; record invariants are left to the provider contract.
pub fn decode_frame_archive(frame_id: u32, bytes: &[u8]) -> Result<(u32, u32, Vec<MaskRecord>)> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MASKS_MAGIC {
        return Err(Error::data("not a mask archive"));
    }
    let version = c.u32()?;
    if version != MASKS_VERSION {
        return Err(Error::data(format!(
            "unsupported mask archive version {version}"
        )));
    }
    let (w, h) = (c.u16()? as u32, c.u16()? as u32);
    let count = c.u32()?;
    let mut records = Vec::with_capacity(count.min(1 << 16) as usize);
    for _ in 0..count {
        let prompt_id = c.u32()?;
        let b = [c.u16()?, c.u16()?, c.u16()?, c.u16()?].map(u32::from);
        let predicted_iou = c.f32()?;
        let stability = c.f32()?;
        let n = c.u32()? as usize;
        let raw = c.take(4 * n)?;
        let runs = raw
            .chunks_exact(4)
            .map(|r| u32::from_le_bytes(r.try_into().unwrap()))
            .collect();
        let mask = Rle::from_runs(w, h, runs)
            .map_err(|e| Error::data(format!("prompt {prompt_id}: {e}")))?;
        records.push(MaskRecord {
            frame_id,
            prompt_id,
            mask,
            bbox: BBox::from_array(b),
            predicted_iou,
            stability,
        });
    }
    if c.pos != bytes.len() {
        return Err(Error::data("trailing bytes after the last record"));
    }
    Ok((w, h, records))
}

pub fn write_frame_archive(
    dir: &Path,
    frame_id: u32,
    width: u32,
    height: u32,
    records: &[MaskRecord],
) -> Result<()> {
    let path = dir.join(archive_file_name(frame_id));
    let bytes = encode_frame_archive(width, height, records)?;
    fs::write(&path, bytes).at(&path)
}

pub fn read_frame_archive(dir: &Path, frame_id: u32) -> Result<(u32, u32, Vec<MaskRecord>)> {
    let path = dir.join(archive_file_name(frame_id));
    let bytes = fs::read(&path).at(&path)?;
    decode_frame_archive(frame_id, &bytes)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

pub fn write_manifest(dir: &Path, m: &MasksManifest) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(m).map_err(Error::data)?;
    fs::write(&path, text + "\n").at(&path)
}

pub fn read_manifest(dir: &Path) -> Result<MasksManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).at(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

/// Writes every frame of `archive` plus the manifest.
pub fn write_archive_dir(dir: &Path, archive: &MaskArchive, provider: &str) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    for (frame_id, records) in archive.iter() {
        write_frame_archive(dir, frame_id, archive.width, archive.height, records)?;
    }
    write_manifest(
        dir,
        &MasksManifest {
            resolution: Resolution {
                width: archive.width,
                height: archive.height,
            },
            prompt_count: archive.prompt_count,
            provider: provider.to_string(),
            frame_ids: archive.frame_ids().collect(),
        },
    )
}

/// Reads the manifest and every frame archive it lists.
pub fn read_archive_dir(dir: &Path) -> Result<(MasksManifest, MaskArchive)> {
    let m = read_manifest(dir)?;
    let mut archive = MaskArchive::new(m.resolution.width, m.resolution.height, m.prompt_count);
    for &id in &m.frame_ids {
        let (w, h, records) = read_frame_archive(dir, id)?;
        if (w, h) != (m.resolution.width, m.resolution.height) {
            return Err(Error::data(format!(
                "frame {id} archive is {w}x{h}, manifest says otherwise"
            )));
        }
        archive.insert_frame(id, records);
    }
    Ok((m, archive))
}
