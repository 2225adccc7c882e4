//! Initial prompt proposal by farthest-point sampling.

use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cloud::PointCloud;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("cannot sample {requested} prompts from {available} points")]
    CountOutOfRange { requested: usize, available: usize },
    #[error("prompt ratio {0} is not in (0, 1]")]
    BadRatio(f64),
}

/// Indices into the scene cloud; a prompt's id is its position in the list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    indices: Vec<u32>,
}

impl PromptSet {
    pub fn from_indices(indices: Vec<u32>) -> Self {
        Self { indices }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Point index of prompt `id`.
    pub fn point_of(&self, id: u32) -> u32 {
        self.indices[id as usize]
    }
}

/// `max(1, round(n·ratio))`, clamped to `n`.
pub fn prompt_ratio_to_count(n: usize, ratio: f64) -> Result<usize, SamplingError> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(SamplingError::BadRatio(ratio));
    }
    let m = libm::round(n as f64 * ratio) as usize;
    Ok(m.max(1).min(n.max(1)))
}

/// Greedy farthest-point sampling.
///
/// The first index is drawn uniformly from a ChaCha8 stream seeded with
/// `seed`; each later pick maximizes the squared distance to its nearest
/// already-chosen point, ties going to the smallest index.
pub fn farthest_point_sample(
    cloud: &PointCloud,
    m: usize,
    seed: u64,
) -> Result<PromptSet, SamplingError> {
    let n = cloud.len();
    if m == 0 || m > n {
        return Err(SamplingError::CountOutOfRange {
            requested: m,
            available: n,
        });
    }
    let pts = cloud.positions();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..n);

    let mut chosen = Vec::with_capacity(m);
    let mut min_dist = vec![f64::INFINITY; n];
    let mut current = first;
    chosen.push(current as u32);
    while chosen.len() < m {
        let c = pts[current];
        let (cx, cy, cz) = (c[0] as f64, c[1] as f64, c[2] as f64);
        let mut best = usize::MAX;
        let mut best_d = -1.0f64;
        for (i, (p, md)) in pts.iter().zip(min_dist.iter_mut()).enumerate() {
            let dx = p[0] as f64 - cx;
            let dy = p[1] as f64 - cy;
            let dz = p[2] as f64 - cz;
            let d = dx * dx + dy * dy + dz * dz;
            if d < *md {
                *md = d;
            }
            if *md > best_d {
                best_d = *md;
                best = i;
            }
        }
        // Chosen points sit at distance 0, so exhausting all positive
        // distances means only duplicates remain: take the smallest unchosen.
        if best_d <= 0.0 {
            let taken: alloc::collections::BTreeSet<u32> = chosen.iter().copied().collect();
            best = (0..n as u32).find(|i| !taken.contains(i)).unwrap() as usize;
            min_dist[best] = 0.0;
        }
        current = best;
        chosen.push(current as u32);
    }
    Ok(PromptSet { indices: chosen })
}
