use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

use super::record::MaskRecord;
use crate::camera::Frame;
use crate::projection::PixelProjection;

/// A prompt id together with its valid projection in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPrompt {
    pub prompt_id: u32,
    pub projection: PixelProjection,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("mask provider unavailable: {0}")]
    ProviderUnavailable(String),
}

/// Source of per-prompt 2D masks.
///
/// A provider returns at most one record per prompt and may omit prompts it
/// cannot segment. Implementations must tolerate concurrent calls on distinct
/// frames.
pub trait MaskProvider: Sync {
    fn name(&self) -> &str;

    fn predict_masks(
        &self,
        frame: &Frame,
        prompts: &[PixelPrompt],
    ) -> Result<Vec<MaskRecord>, ProviderError>;
}

/// Outcome of enforcing the provider contract on a batch of records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContractReport {
    pub dropped_outside_prompt: usize,
    pub dropped_unrequested: usize,
    pub dropped_duplicate: usize,
    pub dropped_invalid: usize,
}

impl ContractReport {
    pub fn total(&self) -> usize {
        self.dropped_outside_prompt
            + self.dropped_unrequested
            + self.dropped_duplicate
            + self.dropped_invalid
    }
}

/// Keeps records that answer a requested prompt, contain that prompt's pixel,
/// satisfy the record invariants and are the first for their prompt.
/// Output is sorted by prompt id.
pub fn enforce_contract(
    frame_id: u32,
    prompts: &[PixelPrompt],
    records: Vec<MaskRecord>,
) -> (Vec<MaskRecord>, ContractReport) {
    let mut report = ContractReport::default();
    let mut by_id: alloc::collections::BTreeMap<u32, &PixelPrompt> = Default::default();
    for p in prompts {
        by_id.insert(p.prompt_id, p);
    }
    let mut kept: alloc::collections::BTreeMap<u32, MaskRecord> = Default::default();
    for r in records {
        let Some(p) = by_id.get(&r.prompt_id) else {
            report.dropped_unrequested += 1;
            continue;
        };
        if r.frame_id != frame_id || r.validate().is_err() {
            report.dropped_invalid += 1;
            continue;
        }
        if !r.contains_pixel(p.projection.u, p.projection.v) {
            report.dropped_outside_prompt += 1;
            continue;
        }
        if kept.contains_key(&r.prompt_id) {
            report.dropped_duplicate += 1;
            continue;
        }
        kept.insert(r.prompt_id, r);
    }
    (kept.into_values().collect(), report)
}
