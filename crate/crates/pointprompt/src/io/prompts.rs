//! Per-frame pixel prompt export, `<frame>.prompts.json`:
//! `{frame_id, width, height, prompts: [{id, u, v}]}`.

use std::fs;
use std::path::Path;

use pointprompt_core::mask::PixelPrompt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPixel {
    pub id: u32,
    pub u: u32,
    pub v: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptExport {
    pub frame_id: u32,
    pub width: u32,
    pub height: u32,
    pub prompts: Vec<PromptPixel>,
}

impl PromptExport {
    /// Prompts must be valid projections into a `width × height` frame.
    pub fn from_prompts(frame_id: u32, width: u32, height: u32, prompts: &[PixelPrompt]) -> Self {
        let mut prompts: Vec<PromptPixel> = prompts
            .iter()
            .map(|p| PromptPixel {
                id: p.prompt_id,
                u: p.projection.u as u32,
                v: p.projection.v as u32,
            })
            .collect();
        prompts.sort_by_key(|p| p.id);
        Self {
            frame_id,
            width,
            height,
            prompts,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self
            .prompts
            .iter()
            .find(|p| p.u >= self.width || p.v >= self.height)
        {
            return Err(Error::data(format!(
                "frame {}: prompt {} at ({}, {}) outside {}x{}",
                self.frame_id, p.id, p.u, p.v, self.width, self.height
            )));
        }
        Ok(())
    }
}

pub fn prompt_file_name(frame_id: u32) -> String {
    format!("{frame_id}.prompts.json")
}

pub fn write_prompt_export(dir: &Path, e: &PromptExport) -> Result<()> {
    let path = dir.join(prompt_file_name(e.frame_id));
    let text = serde_json::to_string(e).map_err(Error::data)?;
    fs::write(&path, text + "\n").at(&path)
}

pub fn read_prompt_export(path: &Path) -> Result<PromptExport> {
    let text = fs::read_to_string(path).at(path)?;
    let e: PromptExport = serde_json::from_str(&text)
        .map_err(|err| Error::data(format!("{}: {err}", path.display())))?;
    e.validate()?;
    Ok(e)
}

/// Every `*.prompts.json` in `dir`, ascending by frame id.
pub fn read_prompt_dir(dir: &Path) -> Result<Vec<PromptExport>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).at(dir)? {
        let path = entry.at(dir)?.path();
        if path.to_str().is_some_and(|s| s.ends_with(".prompts.json")) {
            out.push(read_prompt_export(&path)?);
        }
    }
    out.sort_by_key(|e| e.frame_id);
    Ok(out)
}
