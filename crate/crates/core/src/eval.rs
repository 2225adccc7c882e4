//! Class-agnostic 3D instance AP.
//!
//! Predictions are matched greedily in descending score order: each one takes
//! the unmatched ground-truth instance with the highest IoU if that IoU reaches
//! the threshold, otherwise it is a false positive. AP is the area under the
//! all-point interpolated precision/recall curve. Points marked as ignored are
//! removed from predictions before any overlap is measured.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::segmentation::UNLABELED;

/// IoU thresholds averaged into `ap`: 0.50, 0.55, …, 0.95.
pub const AP_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];
pub const DEFAULT_CONTAINMENT: f64 = 0.8;

/// Ground-truth instance sizes (points) separating tiny / small / normal.
pub const TINY_MAX: usize = 1000;
pub const SMALL_MAX: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: u32,
    /// Point indices, ascending.
    pub points: Vec<u32>,
    pub score: f64,
}

/// Per-point instance ids; [`UNLABELED`] marks unannotated (ignored) points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    labels: Vec<u32>,
}

impl GroundTruth {
    pub fn new(labels: Vec<u32>) -> Self {
        Self { labels }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn is_ignored(&self, i: usize) -> bool {
        self.labels.get(i).is_none_or(|&l| l == UNLABELED)
    }

    /// `(instance id, ascending points)`, ascending by id.
    pub fn instances(&self) -> Vec<(u32, Vec<u32>)> {
        group_labels(&self.labels).into_iter().collect()
    }
}

fn group_labels(labels: &[u32]) -> BTreeMap<u32, Vec<u32>> {
    let mut m: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l != UNLABELED {
            m.entry(l).or_default().push(i as u32);
        }
    }
    m
}

/// Turns a label array into predictions, one per id; missing scores are 1.
pub fn predictions_from_labels(labels: &[u32], scores: &BTreeMap<u32, f64>) -> Vec<Prediction> {
    group_labels(labels)
        .into_iter()
        .map(|(id, points)| Prediction {
            id,
            points,
            score: scores.get(&id).copied().unwrap_or(1.0),
        })
        .collect()
}

/// `|P ∩ G| / |P ∪ G|` after dropping ignored indices from `P`.
/// Both slices must be ascending.
pub fn instance_iou(pred: &[u32], gt: &[u32], ignore: &[bool]) -> f64 {
    let kept = |i: &&u32| !ignore.get(**i as usize).copied().unwrap_or(false);
    let p: Vec<u32> = pred.iter().filter(kept).copied().collect();
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < p.len() && j < gt.len() {
        match p[i].cmp(&gt[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = p.len() + gt.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Intersections between every prediction and ground-truth instance.
struct Overlaps {
    pred_sizes: Vec<usize>,
    gt_ids: Vec<u32>,
    gt_sizes: Vec<usize>,
    inter: Vec<u32>,
}

impl Overlaps {
    fn new(preds: &[Prediction], gt: &GroundTruth) -> Self {
        let instances = gt.instances();
        let mut slot = vec![u32::MAX; gt.len()];
        for (g, (_, pts)) in instances.iter().enumerate() {
            for &p in pts {
                slot[p as usize] = g as u32;
            }
        }
        let ng = instances.len();
        let mut inter = vec![0u32; preds.len() * ng];
        let mut pred_sizes = vec![0usize; preds.len()];
        for (pi, pred) in preds.iter().enumerate() {
            for &p in &pred.points {
                if gt.is_ignored(p as usize) {
                    continue;
                }
                pred_sizes[pi] += 1;
                let g = slot[p as usize];
                if g != u32::MAX {
                    inter[pi * ng + g as usize] += 1;
                }
            }
        }
        Self {
            pred_sizes,
            gt_ids: instances.iter().map(|(id, _)| *id).collect(),
            gt_sizes: instances.iter().map(|(_, p)| p.len()).collect(),
            inter,
        }
    }

    fn ng(&self) -> usize {
        self.gt_ids.len()
    }

    fn inter(&self, p: usize, g: usize) -> u32 {
        self.inter[p * self.ng() + g]
    }

    fn iou(&self, p: usize, g: usize) -> f64 {
        let i = self.inter(p, g) as usize;
        let u = self.pred_sizes[p] + self.gt_sizes[g] - i;
        if u == 0 {
            0.0
        } else {
            i as f64 / u as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub pred: u32,
    pub gt: u32,
    pub iou: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Tp,
    Fp,
    Skip,
}

/// Range of ground-truth sizes counted; everything else is ignored.
type SizeRange = (usize, usize);

fn match_greedy(
    preds: &[Prediction],
    ov: &Overlaps,
    threshold: f64,
    range: Option<SizeRange>,
) -> (Vec<(f64, Outcome)>, usize, Vec<MatchPair>) {
    let in_range = |n: usize| range.is_none_or(|(lo, hi)| n >= lo && n < hi);
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score).then(a.cmp(&b)));
    let ng = ov.ng();
    let counted: Vec<bool> = (0..ng).map(|g| in_range(ov.gt_sizes[g])).collect();
    let num_gt = counted.iter().filter(|c| **c).count();
    let mut matched = vec![false; ng];
    let mut outcomes = Vec::with_capacity(preds.len());
    let mut pairs = Vec::new();
    for p in order {
        if ov.pred_sizes[p] == 0 {
            outcomes.push((preds[p].score, Outcome::Skip));
            continue;
        }
        let best = |want_counted: bool| {
            (0..ng)
                .filter(|&g| !matched[g] && counted[g] == want_counted)
                .map(|g| (ov.iou(p, g), g))
                .fold(None, |b: Option<(f64, usize)>, c| match b {
                    Some(b) if b.0 >= c.0 => Some(b),
                    _ => Some(c),
                })
        };
        match best(true) {
            Some((iou, g)) if iou >= threshold => {
                matched[g] = true;
                outcomes.push((preds[p].score, Outcome::Tp));
                pairs.push(MatchPair {
                    pred: preds[p].id,
                    gt: ov.gt_ids[g],
                    iou,
                });
                continue;
            }
            _ => {}
        }
        let outcome = match best(false) {
            Some((iou, g)) if iou >= threshold => {
                matched[g] = true;
                Outcome::Skip
            }
            _ if !in_range(ov.pred_sizes[p]) => Outcome::Skip,
            _ => Outcome::Fp,
        };
        outcomes.push((preds[p].score, outcome));
    }
    (outcomes, num_gt, pairs)
}

/// All-point interpolated area under the precision/recall curve.
fn area_under_pr(outcomes: &[(f64, Outcome)], num_gt: usize) -> Option<f64> {
    let ranked: Vec<bool> = outcomes
        .iter()
        .filter(|o| o.1 != Outcome::Skip)
        .map(|o| o.1 == Outcome::Tp)
        .collect();
    if num_gt == 0 {
        return if ranked.is_empty() { None } else { Some(0.0) };
    }
    let mut precision = Vec::with_capacity(ranked.len());
    let mut tp = 0usize;
    for (k, &is_tp) in ranked.iter().enumerate() {
        tp += is_tp as usize;
        precision.push(tp as f64 / (k + 1) as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let total = ranked
        .iter()
        .zip(&precision)
        .filter(|(t, _)| **t)
        .fold(0.0, |acc, (_, p)| acc + p);
    Some(total / num_gt as f64)
}

fn ap_at(
    preds: &[Prediction],
    ov: &Overlaps,
    threshold: f64,
    range: Option<SizeRange>,
) -> Option<f64> {
    let (outcomes, num_gt, _) = match_greedy(preds, ov, threshold, range);
    area_under_pr(&outcomes, num_gt)
}

/// AP at one IoU threshold. With no ground truth this is 1 when there are
/// also no predictions and 0 otherwise.
pub fn average_precision(preds: &[Prediction], gt: &GroundTruth, iou_threshold: f64) -> f64 {
    let ov = Overlaps::new(preds, gt);
    ap_at(preds, &ov, iou_threshold, None).unwrap_or(1.0)
}

/// AP50 per ground-truth size class; `None` where a class has no instances.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SizeBreakdown {
    pub tiny: Option<f64>,
    pub small: Option<f64>,
    pub normal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean AP over [`AP_THRESHOLDS`].
    pub ap: f64,
    pub ap50: f64,
    pub ap25: f64,
    pub per_size: SizeBreakdown,
    /// True-positive pairs at IoU 0.5.
    pub matches: Vec<MatchPair>,
}

pub fn evaluate(preds: &[Prediction], gt: &GroundTruth) -> EvalReport {
    let ov = Overlaps::new(preds, gt);
    let at = |t: f64| ap_at(preds, &ov, t, None).unwrap_or(1.0);
    let ap = AP_THRESHOLDS.iter().map(|&t| at(t)).sum::<f64>() / AP_THRESHOLDS.len() as f64;
    let (_, _, matches) = match_greedy(preds, &ov, 0.5, None);
    EvalReport {
        ap,
        ap50: at(0.5),
        ap25: at(0.25),
        per_size: SizeBreakdown {
            tiny: ap_at(preds, &ov, 0.5, Some((0, TINY_MAX))),
            small: ap_at(preds, &ov, 0.5, Some((TINY_MAX, SMALL_MAX))),
            normal: ap_at(preds, &ov, 0.5, Some((SMALL_MAX, usize::MAX))),
        },
        matches,
    }
}

/// Unions, per ground-truth instance, all predictions with more than
/// `containment` of their (non-ignored) points inside it. A group takes the
/// id and score of its highest-scoring member (ties: smaller id), so it keeps
/// that member's place in the ranking; other predictions pass through
/// unchanged.
pub fn group_predictions(
    preds: &[Prediction],
    gt: &GroundTruth,
    containment: f64,
) -> Vec<Prediction> {
    let ov = Overlaps::new(preds, gt);
    let mut owner: Vec<Option<usize>> = vec![None; preds.len()];
    for (p, o) in owner.iter_mut().enumerate() {
        let size = ov.pred_sizes[p];
        if size == 0 {
            continue;
        }
        *o = (0..ov.ng()).find(|&g| ov.inter(p, g) as f64 / size as f64 > containment);
    }
    let mut out = Vec::new();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (p, o) in owner.iter().enumerate() {
        match o {
            Some(g) => groups.entry(*g).or_default().push(p),
            None => out.push(preds[p].clone()),
        }
    }
    for members in groups.values() {
        let mut points: Vec<u32> = members
            .iter()
            .flat_map(|&p| preds[p].points.iter().copied())
            .collect();
        points.sort_unstable();
        points.dedup();
        let lead = members
            .iter()
            .map(|&p| &preds[p])
            .min_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)))
            .unwrap();
        out.push(Prediction {
            id: lead.id,
            points,
            score: lead.score,
        });
    }
    out.sort_by_key(|p| p.id);
    out
}

pub fn grouped_evaluation(preds: &[Prediction], gt: &GroundTruth, containment: f64) -> EvalReport {
    evaluate(&group_predictions(preds, gt, containment), gt)
}
