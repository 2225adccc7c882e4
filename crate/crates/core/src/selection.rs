//! View-guided prompt selection.
//!
//! Every frame examines the masks of the prompts it sees: low-quality masks
//! are dropped, boxes are suppressed greedily, and among masks that overlap
//! heavily only the most confident one is selected. Per prompt, `c` counts
//! frames with a mask and `s` counts frames where it was selected; the prompt
//! is retained when `s / c` exceeds `theta_retain`.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::MaskRecord;
use crate::union_find::UnionFind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("selected prompt {0} has no valid observation in this frame")]
    SelectionNotSubset(u32),
    #[error("invalid selection config: {0}")]
    BadConfig(&'static str),
    #[error("prompt id {id} exceeds the state table of {len} prompts")]
    UnknownPrompt { id: u32, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionVariant {
    Threshold,
    Soft,
    #[serde(rename = "topk")]
    TopK,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub theta_retain: f64,
    /// Box IoU above which the less confident box is suppressed, 0–100.
    pub nms_box_iou: f64,
    pub min_predicted_iou: f64,
    pub min_stability: f64,
    /// Mask IoU (fraction) at or above which two masks count as overlapping.
    pub overlap_dedup_iou: f64,
    pub variant: SelectionVariant,
    pub k: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            theta_retain: 0.5,
            nms_box_iou: 80.0,
            min_predicted_iou: 70.0,
            min_stability: 60.0,
            overlap_dedup_iou: 0.8,
            variant: SelectionVariant::Threshold,
            k: None,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        let frac = |x: f64| (0.0..=1.0).contains(&x);
        let score = |x: f64| (0.0..=100.0).contains(&x);
        if !frac(self.theta_retain) {
            return Err(SelectionError::BadConfig("theta_retain must be in [0, 1]"));
        }
        if !frac(self.overlap_dedup_iou) {
            return Err(SelectionError::BadConfig(
                "overlap_dedup_iou must be in [0, 1]",
            ));
        }
        if !(score(self.nms_box_iou) && score(self.min_predicted_iou) && score(self.min_stability))
        {
            return Err(SelectionError::BadConfig(
                "score thresholds must be in [0, 100]",
            ));
        }
        if self.variant == SelectionVariant::TopK && self.k.is_none() {
            return Err(SelectionError::BadConfig("top-k selection needs k"));
        }
        Ok(())
    }
}

/// Outcome of examining one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameExamination {
    pub frame_id: u32,
    /// Prompts with a mask in this frame, ascending.
    pub valid: Vec<u32>,
    /// Selected prompts, ascending.
    pub selected: Vec<u32>,
    /// Per-selected-prompt quality in [0, 1] (predicted IoU / 100).
    pub selected_quality: Vec<f64>,
}

fn rank(a: &MaskRecord, b: &MaskRecord) -> core::cmp::Ordering {
    b.predicted_iou
        .total_cmp(&a.predicted_iou)
        .then(a.prompt_id.cmp(&b.prompt_id))
}

/// Prompt ids selected in one frame, ascending. All records must come from
/// the same frame.
pub fn per_frame_select(records: &[MaskRecord], cfg: &SelectionConfig) -> Vec<u32> {
    select_records(records, cfg)
        .into_iter()
        .map(|r| r.prompt_id)
        .collect()
}

fn select_records<'a>(records: &'a [MaskRecord], cfg: &SelectionConfig) -> Vec<&'a MaskRecord> {
    let mut cands: Vec<&MaskRecord> = records
        .iter()
        .filter(|r| {
            r.predicted_iou as f64 >= cfg.min_predicted_iou
                && r.stability as f64 >= cfg.min_stability
        })
        .collect();
    cands.sort_by(|a, b| rank(a, b));

    let nms = cfg.nms_box_iou / 100.0;
    let mut survivors: Vec<&MaskRecord> = Vec::with_capacity(cands.len());
    for r in cands {
        if survivors.iter().all(|k| k.bbox.iou(&r.bbox) <= nms) {
            survivors.push(r);
        }
    }

    // Overlap groups are connected components of the mask-IoU graph; a
    // component's first member in rank order is its most confident one.
    let mut uf = UnionFind::new(survivors.len());
    for i in 0..survivors.len() {
        for j in i + 1..survivors.len() {
            let (a, b) = (survivors[i], survivors[j]);
            if a.bbox.intersects(&b.bbox) && a.mask.iou(&b.mask) >= cfg.overlap_dedup_iou {
                uf.union(i, j);
            }
        }
    }
    let mut kept: Vec<&MaskRecord> = (0..survivors.len())
        .filter(|&i| uf.find(i) == i)
        .map(|i| survivors[i])
        .collect();
    kept.sort_by_key(|r| r.prompt_id);
    kept
}

/// Runs the per-frame selection and packages the counters' inputs.
pub fn examine_frame(
    frame_id: u32,
    records: &[MaskRecord],
    cfg: &SelectionConfig,
) -> FrameExamination {
    let mut valid: Vec<u32> = records.iter().map(|r| r.prompt_id).collect();
    valid.sort_unstable();
    valid.dedup();
    let kept = select_records(records, cfg);
    FrameExamination {
        frame_id,
        valid,
        selected: kept.iter().map(|r| r.prompt_id).collect(),
        selected_quality: kept
            .iter()
            .map(|r| r.predicted_iou as f64 / 100.0)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PromptState {
    pub prompt_id: u32,
    /// Frames where the prompt was selected.
    pub s: u32,
    /// Frames where the prompt had a mask.
    pub c: u32,
    pub soft_sum: f64,
    pub retained: bool,
}

/// Counters for every prompt, indexed by prompt id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PromptStates {
    states: Vec<PromptState>,
}

impl PromptStates {
    pub fn new(prompt_count: usize) -> Self {
        Self {
            states: (0..prompt_count as u32)
                .map(|prompt_id| PromptState {
                    prompt_id,
                    ..Default::default()
                })
                .collect(),
        }
    }

    pub fn states(&self) -> &[PromptState] {
        &self.states
    }

    pub fn get(&self, id: u32) -> Option<&PromptState> {
        self.states.get(id as usize)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `c += 1` for each valid id and `s += 1` for each selected id.
    /// `selected` must be a subset of `valid`; `quality` (optional) runs
    /// parallel to `selected` and feeds the soft variant.
    pub fn accumulate(
        &mut self,
        valid: &[u32],
        selected: &[u32],
        quality: Option<&[f64]>,
    ) -> Result<(), SelectionError> {
        let len = self.states.len();
        for &id in valid.iter().chain(selected) {
            if id as usize >= len {
                return Err(SelectionError::UnknownPrompt { id, len });
            }
        }
        if let Some(&bad) = selected.iter().find(|id| !valid.contains(id)) {
            return Err(SelectionError::SelectionNotSubset(bad));
        }
        for &id in valid {
            self.states[id as usize].c += 1;
        }
        for (i, &id) in selected.iter().enumerate() {
            let st = &mut self.states[id as usize];
            st.s += 1;
            st.soft_sum += quality.map_or(1.0, |q| q[i]);
        }
        Ok(())
    }

    pub fn accumulate_frame(&mut self, exam: &FrameExamination) -> Result<(), SelectionError> {
        self.accumulate(&exam.valid, &exam.selected, Some(&exam.selected_quality))
    }

    /// Element-wise sum of two tables over the same prompts.
    pub fn merge(&mut self, other: &PromptStates) {
        for (a, b) in self.states.iter_mut().zip(&other.states) {
            a.s += b.s;
            a.c += b.c;
            a.soft_sum += b.soft_sum;
        }
    }

    /// Decides retention, records it on each state and returns retained ids
    /// ascending. Prompts never observed (`c = 0`) are never retained.
    pub fn finalize(&mut self, cfg: &SelectionConfig) -> Vec<u32> {
        let theta = cfg.theta_retain;
        match cfg.variant {
            SelectionVariant::Threshold => {
                for st in &mut self.states {
                    st.retained = st.c > 0 && (st.s as f64 / st.c as f64) > theta;
                }
            }
            SelectionVariant::Soft => {
                for st in &mut self.states {
                    st.retained = st.c > 0 && (st.soft_sum / st.c as f64) > theta;
                }
            }
            SelectionVariant::TopK => {
                let k = cfg.k.unwrap_or(0);
                let mut order: Vec<&PromptState> = self.states.iter().filter(|s| s.c > 0).collect();
                order.sort_by(|a, b| b.s.cmp(&a.s).then(a.prompt_id.cmp(&b.prompt_id)));
                let keep: alloc::collections::BTreeSet<u32> =
                    order.iter().take(k).map(|s| s.prompt_id).collect();
                for st in &mut self.states {
                    st.retained = keep.contains(&st.prompt_id);
                }
            }
        }
        self.retained()
    }

    /// Marks every observed prompt retained (selection disabled).
    pub fn retain_all_observed(&mut self) -> Vec<u32> {
        for st in &mut self.states {
            st.retained = st.c > 0;
        }
        self.retained()
    }

    pub fn retained(&self) -> Vec<u32> {
        self.states
            .iter()
            .filter(|s| s.retained)
            .map(|s| s.prompt_id)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{BinaryMask, Rle};
    use alloc::vec;

    fn rec(prompt: u32, lo: (u32, u32), hi: (u32, u32), conf: f32) -> MaskRecord {
        let m = BinaryMask::from_fn(40, 30, |u, v| {
            u >= lo.0 && u <= hi.0 && v >= lo.1 && v <= hi.1
        });
        MaskRecord::new(0, prompt, Rle::encode(&m), conf, 95.0).unwrap()
    }

    #[test]
    fn disjoint_masks_both_selected() {
        let r = [
            rec(0, (0, 0), (5, 5), 90.0),
            rec(1, (10, 10), (15, 15), 85.0),
        ];
        assert_eq!(
            per_frame_select(&r, &SelectionConfig::default()),
            vec![0, 1]
        );
    }

    #[test]
    fn identical_masks_keep_most_confident() {
        let r = [rec(4, (0, 0), (9, 9), 80.0), rec(2, (0, 0), (9, 9), 90.0)];
        assert_eq!(per_frame_select(&r, &SelectionConfig::default()), vec![2]);
        // equal confidence: smaller id wins
        let r = [rec(4, (0, 0), (9, 9), 90.0), rec(2, (0, 0), (9, 9), 90.0)];
        assert_eq!(per_frame_select(&r, &SelectionConfig::default()), vec![2]);
    }

    #[test]
    fn low_quality_dropped() {
        let r = [rec(0, (0, 0), (5, 5), 65.0)];
        assert!(per_frame_select(&r, &SelectionConfig::default()).is_empty());
        let mut unstable = rec(1, (0, 0), (5, 5), 95.0);
        unstable.stability = 59.0;
        assert!(per_frame_select(&[unstable], &SelectionConfig::default()).is_empty());
    }

    #[test]
    fn overlap_group_is_transitive_after_nms() {
        // Boxes differ enough to survive NMS at 80 but masks overlap ≥ 0.8 in a chain.
        let cfg = SelectionConfig {
            nms_box_iou: 100.0,
            ..Default::default()
        };
        let r = [
            rec(0, (0, 0), (19, 19), 80.0),
            rec(1, (1, 0), (20, 19), 85.0),
            rec(2, (2, 0), (21, 19), 75.0),
            rec(3, (30, 0), (35, 5), 71.0),
        ];
        assert_eq!(per_frame_select(&r, &cfg), vec![1, 3]);
    }

    #[test]
    fn accumulate_counts() {
        let mut st = PromptStates::new(3);
        st.accumulate(&[1, 2], &[1], None).unwrap();
        assert_eq!((st.get(1).unwrap().s, st.get(1).unwrap().c), (1, 1));
        assert_eq!((st.get(2).unwrap().s, st.get(2).unwrap().c), (0, 1));
        st.accumulate(&[], &[], None).unwrap();
        assert_eq!(st.get(0).unwrap().c, 0);
        assert_eq!(
            st.accumulate(&[0], &[1], None),
            Err(SelectionError::SelectionNotSubset(1))
        );
        assert!(st.accumulate(&[7], &[], None).is_err());
    }

    fn states_with(s: u32, c: u32) -> PromptStates {
        let mut st = PromptStates::new(1);
        st.states[0].s = s;
        st.states[0].c = c;
        st
    }

    #[test]
    fn strict_threshold() {
        let cfg = SelectionConfig::default();
        assert_eq!(states_with(6, 10).finalize(&cfg), vec![0]);
        assert!(states_with(5, 10).finalize(&cfg).is_empty());
        assert!(states_with(0, 0).finalize(&cfg).is_empty());
    }

    #[test]
    fn soft_and_topk() {
        let mut st = PromptStates::new(4);
        st.accumulate(&[0, 1, 2], &[0, 1], Some(&[0.9, 0.4]))
            .unwrap();
        st.accumulate(&[0, 1, 2], &[0, 2], Some(&[0.8, 0.95]))
            .unwrap();
        let soft = SelectionConfig {
            variant: SelectionVariant::Soft,
            ..Default::default()
        };
        // soft averages: 0.85, 0.2, 0.475
        assert_eq!(st.clone().finalize(&soft), vec![0]);
        let topk = SelectionConfig {
            variant: SelectionVariant::TopK,
            k: Some(2),
            ..Default::default()
        };
        // s = 2, 1, 1 → prompt 0, then the smaller of 1/2
        assert_eq!(st.finalize(&topk), vec![0, 1]);
        assert!(SelectionConfig {
            variant: SelectionVariant::TopK,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
