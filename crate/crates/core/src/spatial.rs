//! Static 3-d tree for k-nearest-neighbour queries.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    id: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        self.dist2.total_cmp(&o.dist2).then(self.id.cmp(&o.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<([f64; 3], u32)>,
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    /// Builds the tree; `id` is returned by queries.
    pub fn build(points: impl IntoIterator<Item = ([f64; 3], u32)>) -> Self {
        let mut points: Vec<_> = points.into_iter().collect();
        Self::split(&mut points, 0);
        Self { points }
    }

    fn split(pts: &mut [([f64; 3], u32)], depth: usize) {
        if pts.len() <= 1 {
            return;
        }
        let axis = depth % 3;
        let mid = pts.len() / 2;
        pts.select_nth_unstable_by(mid, |a, b| {
            a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1))
        });
        let (left, right) = pts.split_at_mut(mid);
        Self::split(left, depth + 1);
        Self::split(&mut right[1..], depth + 1);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest entries as `(squared distance, id)`, ordered by
    /// distance then id. Equal distances resolve to smaller ids.
    pub fn nearest(&self, q: &[f64; 3], k: usize) -> Vec<(f64, u32)> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        Self::search(&self.points, 0, q, k, &mut heap);
        let mut out: Vec<_> = heap.into_iter().map(|c| (c.dist2, c.id)).collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    fn search(
        pts: &[([f64; 3], u32)],
        depth: usize,
        q: &[f64; 3],
        k: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        if pts.is_empty() {
            return;
        }
        let axis = depth % 3;
        let mid = pts.len() / 2;
        let (p, id) = pts[mid];
        let cand = Candidate {
            dist2: dist2(&p, q),
            id,
        };
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().unwrap() {
            heap.pop();
            heap.push(cand);
        }
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            (&pts[..mid], &pts[mid + 1..])
        } else {
            (&pts[mid + 1..], &pts[..mid])
        };
        Self::search(near, depth + 1, q, k, heap);
        // Ties at the splitting plane may still improve on ids, hence `<=`.
        if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
            Self::search(far, depth + 1, q, k, heap);
        }
    }
}
