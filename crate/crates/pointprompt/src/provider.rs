//! Mask provider backed by an archive directory.

use std::path::{Path, PathBuf};

use pointprompt_core::camera::Frame;
use pointprompt_core::mask::{MaskProvider, MaskRecord, PixelPrompt, ProviderError};

use crate::error::Result;
use crate::io::masks::{read_frame_archive, read_manifest, MasksManifest};

/// Reads `<frame>.masks.bin` files on demand; safe to call from many threads.
#[derive(Debug, Clone)]
pub struct FileMaskProvider {
    dir: PathBuf,
    manifest: MasksManifest,
}

impl FileMaskProvider {
    pub fn open(dir: &Path) -> Result<Self> {
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: read_manifest(dir)?,
        })
    }

    pub fn manifest(&self) -> &MasksManifest {
        &self.manifest
    }
}

impl MaskProvider for FileMaskProvider {
    fn name(&self) -> &str {
        "file"
    }

    /// Returns the archived records of the frame; filtering against the
    /// requested prompts happens in the provider contract check.
    fn predict_masks(
        &self,
        frame: &Frame,
        _prompts: &[PixelPrompt],
    ) -> Result<Vec<MaskRecord>, ProviderError> {
        let unavailable = |m: String| ProviderError::ProviderUnavailable(m);
        if !self.manifest.frame_ids.contains(&frame.id) {
            return Err(unavailable(format!(
                "no masks archived for frame {}",
                frame.id
            )));
        }
        let res = self.manifest.resolution;
        if (res.width, res.height) != (frame.width(), frame.height()) {
            return Err(unavailable(format!(
                "archive resolution {}x{} differs from the working resolution {}x{}",
                res.width,
                res.height,
                frame.width(),
                frame.height()
            )));
        }
        let (_, _, records) =
            read_frame_archive(&self.dir, frame.id).map_err(|e| unavailable(e.to_string()))?;
        Ok(records)
    }
}
