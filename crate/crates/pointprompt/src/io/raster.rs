//! Instance-id rasters: "SPID", u16 width, u16 height, width·height × u32 (LE).

use std::fs;
use std::path::Path;

use pointprompt_core::synthetic::InstanceRaster;

use crate::error::{Error, IoContext, Result};

pub const RASTER_MAGIC: &[u8; 4] = b"SPID";

pub fn encode_raster(r: &InstanceRaster) -> Result<Vec<u8>> {
    let (w, h) = (u16::try_from(r.width()), u16::try_from(r.height()));
    let (Ok(w), Ok(h)) = (w, h) else {
        return Err(Error::data("instance raster exceeds 65535 pixels per side"));
    };
    let mut out = Vec::with_capacity(8 + 4 * r.ids().len());
    out.extend_from_slice(RASTER_MAGIC);
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    for id in r.ids() {
        out.extend_from_slice(&id.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_raster(bytes: &[u8]) -> Result<InstanceRaster> {
    if bytes.len() < 8 || &bytes[..4] != RASTER_MAGIC {
        return Err(Error::data("not an instance raster"));
    }
    let w = u16::from_le_bytes([bytes[4], bytes[5]]) as u32;
    let h = u16::from_le_bytes([bytes[6], bytes[7]]) as u32;
    let body = &bytes[8..];
    if body.len() != 4 * w as usize * h as usize {
        return Err(Error::data(
            "instance raster size does not match its header",
        ));
    }
    let ids = body
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    InstanceRaster::new(w, h, ids).map_err(Error::data)
}

pub fn write_raster(path: &Path, r: &InstanceRaster) -> Result<()> {
    fs::write(path, encode_raster(r)?).at(path)
}

pub fn read_raster(path: &Path) -> Result<InstanceRaster> {
    let bytes = fs::read(path).at(path)?;
    decode_raster(&bytes).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}
