//! Cross-frame voting of pseudo-prompt ids onto scene points.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::archive::MaskArchive;
use crate::camera::Frame;
use crate::cloud::PointCloud;
use crate::consolidation::ConsolidationMap;
use crate::mask::MaskRecord;
use crate::projection::{FrameVisibility, NOT_VISIBLE};
use crate::spatial::KdTree;

/// Label of a point without an instance.
pub const UNLABELED: u32 = u32::MAX;
pub const DEFAULT_K_NEIGHBORS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentationError {
    #[error("no labeled point to propagate from")]
    AllUnlabeled,
    #[error("vote table has {votes} points, cloud has {points}")]
    LengthMismatch { votes: usize, points: usize },
}

/// Per-pixel winning pseudo-prompt of one frame.
fn winner_raster(
    width: u32,
    height: u32,
    records: &[MaskRecord],
    map: &ConsolidationMap,
) -> Vec<(f32, u32)> {
    let mut best = vec![(f32::NEG_INFINITY, UNLABELED); width as usize * height as usize];
    for r in records {
        let Some(root) = map.root(r.prompt_id) else {
            continue;
        };
        let conf = r.predicted_iou;
        for (s, e) in r.mask.spans() {
            for cell in &mut best[s..e] {
                if conf > cell.0 || (conf == cell.0 && root < cell.1) {
                    *cell = (conf, root);
                }
            }
        }
    }
    best
}

/// `(point, pseudo-prompt)` votes cast in one frame, ascending by point.
///
/// A visible point inside the masks of several pseudo-prompts votes for the
/// one whose covering record is most confident; ties go to the smaller id.
pub fn frame_votes(
    vis: &FrameVisibility,
    records: &[MaskRecord],
    map: &ConsolidationMap,
) -> Vec<(u32, u32)> {
    let best = winner_raster(vis.width, vis.height, records, map);
    let mut out = Vec::new();
    for (s, e) in coverage_spans(&best) {
        for &p in vis.points_in_span(s, e) {
            out.push((p, best[vis.pixel_of(p as usize) as usize].1));
        }
    }
    out.sort_unstable();
    out
}

fn coverage_spans(best: &[(f32, u32)]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in best.iter().enumerate() {
        match (c.1 != UNLABELED, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, best.len()));
    }
    spans
}

/// Per-point assignment for one frame: `Some(pseudo id)` or `None`.
pub fn assign_frame_votes(
    cloud: &PointCloud,
    frame: &Frame,
    archive: &MaskArchive,
    map: &ConsolidationMap,
    tol: f64,
) -> Vec<Option<u32>> {
    let vis = FrameVisibility::compute(cloud, frame, tol);
    let best = winner_raster(frame.width(), frame.height(), archive.frame(frame.id), map);
    (0..cloud.len())
        .map(|i| {
            let px = vis.pixel_of(i);
            if px == NOT_VISIBLE {
                return None;
            }
            let id = best[px as usize].1;
            (id != UNLABELED).then_some(id)
        })
        .collect()
}

/// Sparse per-point vote counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteTable {
    votes: Vec<Vec<(u32, u32)>>,
}

impl VoteTable {
    pub fn new(points: usize) -> Self {
        Self {
            votes: vec![Vec::new(); points],
        }
    }

    pub fn len(&self) -> usize {
        self.votes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }

    /// Entries `(id, count)` of one point, ascending by id.
    pub fn point(&self, i: usize) -> &[(u32, u32)] {
        &self.votes[i]
    }

    pub fn add_vote(&mut self, point: u32, id: u32) {
        let v = &mut self.votes[point as usize];
        match v.binary_search_by_key(&id, |e| e.0) {
            Ok(i) => v[i].1 += 1,
            Err(i) => v.insert(i, (id, 1)),
        }
    }

    pub fn add_frame(&mut self, votes: &[(u32, u32)]) {
        for &(p, id) in votes {
            self.add_vote(p, id);
        }
    }

    /// Per-point count addition; commutative and associative.
    pub fn merge(&mut self, other: &VoteTable) {
        for (i, vs) in other.votes.iter().enumerate() {
            for &(id, n) in vs {
                let v = &mut self.votes[i];
                match v.binary_search_by_key(&id, |e| e.0) {
                    Ok(j) => v[j].1 += n,
                    Err(j) => v.insert(j, (id, n)),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    /// Instance id per point, [`UNLABELED`] where none.
    pub labels: Vec<u32>,
    /// Per instance: mean over its voted points of winning votes / total votes.
    pub scores: BTreeMap<u32, f64>,
}

impl SegmentationResult {
    pub fn unlabeled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == UNLABELED).count()
    }

    /// Distinct instance ids, ascending.
    pub fn instance_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .labels
            .iter()
            .copied()
            .filter(|&l| l != UNLABELED)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Majority vote per point; ties go to the smaller id.
pub fn finalize_votes(votes: &VoteTable) -> SegmentationResult {
    let mut labels = vec![UNLABELED; votes.len()];
    let mut acc: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for (i, vs) in votes.votes.iter().enumerate() {
        // ascending id order, strict `>` keeps the smaller id on ties
        let Some(&(id, n)) = vs
            .iter()
            .fold(None, |best: Option<&(u32, u32)>, e| match best {
                Some(b) if b.1 >= e.1 => Some(b),
                _ => Some(e),
            })
        else {
            continue;
        };
        labels[i] = id;
        let total: u32 = vs.iter().map(|e| e.1).sum();
        let a = acc.entry(id).or_insert((0.0, 0));
        a.0 += n as f64 / total as f64;
        a.1 += 1;
    }
    let scores = acc
        .into_iter()
        .map(|(id, (s, n))| (id, s / n as f64))
        .collect();
    SegmentationResult { labels, scores }
}

/// Gives each unlabeled point the most common label among its `k` nearest
/// labeled points (ties: smaller id), repeating until every point is labeled.
pub fn fill_unlabeled(
    result: &SegmentationResult,
    cloud: &PointCloud,
    k_neighbors: usize,
) -> Result<SegmentationResult, SegmentationError> {
    if result.labels.len() != cloud.len() {
        return Err(SegmentationError::LengthMismatch {
            votes: result.labels.len(),
            points: cloud.len(),
        });
    }
    let mut labels = result.labels.clone();
    let k = k_neighbors.max(1);
    loop {
        let pending: Vec<usize> = (0..labels.len())
            .filter(|&i| labels[i] == UNLABELED)
            .collect();
        if pending.is_empty() {
            break;
        }
        if pending.len() == labels.len() {
            return Err(SegmentationError::AllUnlabeled);
        }
        let as_f64 = |i: usize| {
            let p = cloud.positions()[i];
            [p[0] as f64, p[1] as f64, p[2] as f64]
        };
        let tree = KdTree::build(
            (0..labels.len())
                .filter(|&i| labels[i] != UNLABELED)
                .map(|i| (as_f64(i), i as u32)),
        );
        let snapshot = labels.clone();
        for &i in &pending {
            let near = tree.nearest(&as_f64(i), k);
            labels[i] = majority(near.iter().map(|&(_, j)| snapshot[j as usize]));
        }
    }
    Ok(SegmentationResult {
        labels,
        scores: result.scores.clone(),
    })
}

fn majority(labels: impl Iterator<Item = u32>) -> u32 {
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    counts
        .into_iter()
        .fold(
            (UNLABELED, 0),
            |best, (id, n)| if n > best.1 { (id, n) } else { best },
        )
        .0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(entries: &[&[(u32, u32)]]) -> VoteTable {
        let mut t = VoteTable::new(entries.len());
        for (i, e) in entries.iter().enumerate() {
            for &(id, n) in *e {
                for _ in 0..n {
                    t.add_vote(i as u32, id);
                }
            }
        }
        t
    }

    #[test]
    fn majority_and_ties() {
        let r = finalize_votes(&table(&[&[(7, 5), (3, 3)], &[(9, 4), (4, 4)], &[]]));
        assert_eq!(r.labels, vec![7, 4, UNLABELED]);
        assert!((r.scores[&7] - 5.0 / 8.0).abs() < 1e-12);
        assert!((r.scores[&4] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn merge_is_count_addition() {
        let mut a = table(&[&[(1, 2)], &[]]);
        let b = table(&[&[(1, 1), (2, 1)], &[(5, 1)]]);
        a.merge(&b);
        assert_eq!(a.point(0), &[(1, 3), (2, 1)]);
        assert_eq!(a.point(1), &[(5, 1)]);
    }

    #[test]
    fn fill_identity_and_neighbourhood() {
        let pts: Vec<[f32; 3]> = (0..9)
            .map(|i| [(i % 3) as f32, (i / 3) as f32, 0.0])
            .collect();
        let cloud = PointCloud::new(pts, None).unwrap();
        let full = SegmentationResult {
            labels: vec![2; 9],
            scores: BTreeMap::new(),
        };
        assert_eq!(fill_unlabeled(&full, &cloud, 4).unwrap(), full);
        let mut holed = full.clone();
        holed.labels[4] = UNLABELED;
        assert_eq!(fill_unlabeled(&holed, &cloud, 8).unwrap().labels[4], 2);
        let empty = SegmentationResult {
            labels: vec![UNLABELED; 9],
            scores: BTreeMap::new(),
        };
        assert_eq!(
            fill_unlabeled(&empty, &cloud, 4),
            Err(SegmentationError::AllUnlabeled)
        );
    }
}
