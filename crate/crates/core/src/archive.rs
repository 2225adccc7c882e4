//! In-memory collection of mask records for a sequence of frames.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::mask::MaskRecord;

/// Records keyed by frame, each frame's list sorted by prompt id with at most
/// one record per prompt.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaskArchive {
    pub width: u32,
    pub height: u32,
    pub prompt_count: u32,
    frames: BTreeMap<u32, Vec<MaskRecord>>,
}

impl MaskArchive {
    pub fn new(width: u32, height: u32, prompt_count: u32) -> Self {
        Self {
            width,
            height,
            prompt_count,
            frames: BTreeMap::new(),
        }
    }

    /// Replaces the records of `frame_id`. Later duplicates of a prompt are
    /// discarded.
    pub fn insert_frame(&mut self, frame_id: u32, mut records: Vec<MaskRecord>) {
        records.sort_by_key(|r| r.prompt_id);
        records.dedup_by_key(|r| r.prompt_id);
        self.frames.insert(frame_id, records);
    }

    pub fn frame(&self, frame_id: u32) -> &[MaskRecord] {
        self.frames
            .get(&frame_id)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn has_frame(&self, frame_id: u32) -> bool {
        self.frames.contains_key(&frame_id)
    }

    pub fn record(&self, frame_id: u32, prompt_id: u32) -> Option<&MaskRecord> {
        let recs = self.frames.get(&frame_id)?;
        recs.binary_search_by_key(&prompt_id, |r| r.prompt_id)
            .ok()
            .map(|i| &recs[i])
    }

    pub fn frame_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.frames.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[MaskRecord])> + '_ {
        self.frames.iter().map(|(&id, r)| (id, r.as_slice()))
    }

    pub fn record_count(&self) -> usize {
        self.frames.values().map(|v| v.len()).sum()
    }

    /// A copy holding only records for which `keep` returns true.
    pub fn filtered(&self, mut keep: impl FnMut(&MaskRecord) -> bool) -> Self {
        Self {
            width: self.width,
            height: self.height,
            prompt_count: self.prompt_count,
            frames: self
                .frames
                .iter()
                .map(|(&id, recs)| (id, recs.iter().filter(|r| keep(r)).cloned().collect()))
                .collect(),
        }
    }
}
