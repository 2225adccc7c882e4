//! Surface-based prompt consolidation.
//!
//! A prompt's masked surface is the set of cloud points that land inside its
//! masks. Prompts whose surfaces intersect enough are merged into one
//! pseudo-prompt, identified by the smallest member id.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::archive::MaskArchive;
use crate::camera::Frame;
use crate::cloud::PointCloud;
use crate::projection::{project_point, visibility_test, FrameVisibility};
use crate::union_find::UnionFind;

pub const DEFAULT_TAU_MERGE: f64 = 0.25;
pub const DEFAULT_MIN_SUPPORT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsolidationError {
    #[error("edge references prompt {0}, which is not retained")]
    UnknownPrompt(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MaskedSurface {
    pub prompt_id: u32,
    /// Ascending point indices.
    pub point_indices: Vec<u32>,
    /// Number of frames supporting each entry of `point_indices`.
    pub support: Vec<u32>,
}

impl MaskedSurface {
    pub fn len(&self) -> usize {
        self.point_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_indices.is_empty()
    }

    fn from_hits(prompt_id: u32, mut hits: Vec<u32>, min_support: u32) -> Self {
        hits.sort_unstable();
        let mut s = Self {
            prompt_id,
            ..Default::default()
        };
        let mut i = 0;
        while i < hits.len() {
            let mut j = i;
            while j < hits.len() && hits[j] == hits[i] {
                j += 1;
            }
            let n = (j - i) as u32;
            if n >= min_support.max(1) {
                s.point_indices.push(hits[i]);
                s.support.push(n);
            }
            i = j;
        }
        s
    }
}

/// Direct form: projects every point into every frame holding a record for
/// `prompt_id`. A point belongs to the surface when it is visible and inside
/// the mask in at least `min_support` frames.
pub fn compute_masked_surface(
    prompt_id: u32,
    frames: &[Frame],
    archive: &MaskArchive,
    cloud: &PointCloud,
    tol: f64,
    min_support: u32,
) -> MaskedSurface {
    let mut hits = Vec::new();
    for frame in frames {
        let Some(rec) = archive.record(frame.id, prompt_id) else {
            continue;
        };
        for (i, p) in cloud.iter_points().enumerate() {
            let proj = project_point(&p, i as u32, frame);
            if visibility_test(&proj, frame, tol) && rec.contains_pixel(proj.u, proj.v) {
                hits.push(i as u32);
            }
        }
    }
    MaskedSurface::from_hits(prompt_id, hits, min_support)
}

/// Surfaces for many prompts at once, reading points per mask span from
/// precomputed frame visibility. Equivalent to calling
/// [`compute_masked_surface`] per prompt with the tolerance used to build
/// `visibility`.
pub fn compute_masked_surfaces(
    prompt_ids: &[u32],
    visibility: &[FrameVisibility],
    archive: &MaskArchive,
    min_support: u32,
) -> Vec<MaskedSurface> {
    let mut slot: BTreeMap<u32, usize> = BTreeMap::new();
    for (i, &id) in prompt_ids.iter().enumerate() {
        slot.insert(id, i);
    }
    let mut hits: Vec<Vec<u32>> = vec![Vec::new(); prompt_ids.len()];
    for vis in visibility {
        for rec in archive.frame(vis.frame_id) {
            let Some(&s) = slot.get(&rec.prompt_id) else {
                continue;
            };
            for (start, end) in rec.mask.spans() {
                hits[s].extend_from_slice(vis.points_in_span(start, end));
            }
        }
    }
    prompt_ids
        .iter()
        .zip(hits)
        .map(|(&id, h)| MaskedSurface::from_hits(id, h, min_support))
        .collect()
}

/// Edges `(a, b)` with `a < b` (prompt ids) where
/// `|Sa ∩ Sb| / min(|Sa|, |Sb|) ≥ tau_merge` and the intersection is non-empty.
pub fn build_overlap_graph(surfaces: &[MaskedSurface], tau_merge: f64) -> Vec<(u32, u32)> {
    let n_points = surfaces
        .iter()
        .filter_map(|s| s.point_indices.last())
        .map(|&i| i as usize + 1)
        .max()
        .unwrap_or(0);
    // Inverted index: point → surfaces covering it.
    let mut offsets = vec![0u32; n_points + 1];
    for s in surfaces {
        for &p in &s.point_indices {
            offsets[p as usize + 1] += 1;
        }
    }
    for i in 0..n_points {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut cover = vec![0u32; offsets[n_points] as usize];
    for (si, s) in surfaces.iter().enumerate() {
        for &p in &s.point_indices {
            let c = &mut cursor[p as usize];
            cover[*c as usize] = si as u32;
            *c += 1;
        }
    }

    let mut counts = vec![0u32; surfaces.len()];
    let mut touched: Vec<usize> = Vec::new();
    let mut edges = Vec::new();
    for (a, sa) in surfaces.iter().enumerate() {
        for &p in &sa.point_indices {
            let range = offsets[p as usize] as usize..offsets[p as usize + 1] as usize;
            for &b in &cover[range] {
                let b = b as usize;
                if b > a {
                    if counts[b] == 0 {
                        touched.push(b);
                    }
                    counts[b] += 1;
                }
            }
        }
        for &b in &touched {
            let inter = counts[b] as f64;
            let smaller = sa.len().min(surfaces[b].len()) as f64;
            if counts[b] >= 1 && inter / smaller >= tau_merge {
                let (x, y) = (sa.prompt_id, surfaces[b].prompt_id);
                if x != y {
                    edges.push((x.min(y), x.max(y)));
                }
            }
            counts[b] = 0;
        }
        touched.clear();
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Prompt id → pseudo-prompt id (smallest id of its connected component).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConsolidationMap {
    parent: BTreeMap<u32, u32>,
}

impl ConsolidationMap {
    /// Every prompt is its own pseudo-prompt.
    pub fn identity(ids: &[u32]) -> Self {
        Self {
            parent: ids.iter().map(|&i| (i, i)).collect(),
        }
    }

    pub fn root(&self, id: u32) -> Option<u32> {
        self.parent.get(&id).copied()
    }

    pub fn parent(&self) -> &BTreeMap<u32, u32> {
        &self.parent
    }

    /// Pseudo-prompt ids, ascending.
    pub fn roots(&self) -> Vec<u32> {
        let mut r: Vec<u32> = self
            .parent
            .iter()
            .filter(|(k, v)| k == v)
            .map(|(k, _)| *k)
            .collect();
        r.sort_unstable();
        r
    }

    /// Members of each pseudo-prompt, keyed by root.
    pub fn groups(&self) -> BTreeMap<u32, Vec<u32>> {
        let mut g: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (&k, &v) in &self.parent {
            g.entry(v).or_default().push(k);
        }
        g
    }
}

/// Connected components of the overlap graph over the retained prompts.
pub fn consolidate(
    edges: &[(u32, u32)],
    retained: &[u32],
) -> Result<ConsolidationMap, ConsolidationError> {
    let mut ids = retained.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let index = |id: u32| {
        ids.binary_search(&id)
            .map_err(|_| ConsolidationError::UnknownPrompt(id))
    };
    let mut uf = UnionFind::new(ids.len());
    for &(a, b) in edges {
        uf.union(index(a)?, index(b)?);
    }
    let parent = (0..ids.len()).map(|i| (ids[i], ids[uf.find(i)])).collect();
    Ok(ConsolidationMap { parent })
}
