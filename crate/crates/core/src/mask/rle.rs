//! Row-major run-length encoding of binary rasters.
//!
//! Runs alternate unset/set starting with an unset run, which may have length
//! zero. An all-zero 4×4 raster encodes as `[16]`, an all-one raster as
//! `[0, 16]`.

use alloc::vec::Vec;
use thiserror::Error;

use super::raster::BinaryMask;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RleError {
    #[error("runs cover {covered} pixels, more than the {expected} in the raster")]
    RleOverrun { expected: usize, covered: usize },
    #[error("runs cover {covered} pixels, fewer than the {expected} in the raster")]
    RleUnderrun { expected: usize, covered: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rle {
    width: u32,
    height: u32,
    runs: Vec<u32>,
}

impl Rle {
    /// Validates that `runs` cover exactly `width × height` pixels.
    pub fn from_runs(width: u32, height: u32, runs: Vec<u32>) -> Result<Self, RleError> {
        let expected = width as usize * height as usize;
        let covered = runs.iter().map(|&r| r as usize).sum::<usize>();
        if covered > expected {
            return Err(RleError::RleOverrun { expected, covered });
        }
        if covered < expected {
            return Err(RleError::RleUnderrun { expected, covered });
        }
        Ok(Self {
            width,
            height,
            runs,
        })
    }

    pub fn encode(mask: &BinaryMask) -> Self {
        Self::encode_bits(mask.width(), mask.height(), mask.bits())
    }

    pub fn encode_bits(width: u32, height: u32, bits: &[bool]) -> Self {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &b in bits {
            if b != current {
                runs.push(len);
                current = b;
                len = 0;
            }
            len += 1;
        }
        runs.push(len);
        Self {
            width,
            height,
            runs,
        }
    }

    /// Encodes set spans `[start, end)` given in increasing, non-overlapping order.
    pub fn from_spans(
        width: u32,
        height: u32,
        spans: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let total = width as usize * height as usize;
        let mut runs = Vec::new();
        let mut pos = 0usize;
        for (s, e) in spans {
            debug_assert!(s >= pos && e >= s && e <= total);
            if e == s {
                continue;
            }
            if s == pos && !runs.is_empty() {
                // Adjacent to the previous set run: extend it.
                *runs.last_mut().unwrap() += (e - s) as u32;
            } else {
                runs.push((s - pos) as u32);
                runs.push((e - s) as u32);
            }
            pos = e;
        }
        if runs.is_empty() {
            runs.push(total as u32);
        } else if pos < total {
            runs.push((total - pos) as u32);
        }
        Self {
            width,
            height,
            runs,
        }
    }

    pub fn decode(&self) -> BinaryMask {
        let mut bits = Vec::with_capacity(self.pixel_count());
        let mut value = false;
        for &r in &self.runs {
            bits.extend(core::iter::repeat_n(value, r as usize));
            value = !value;
        }
        BinaryMask::from_bits(self.width, self.height, bits)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Set spans as `[start, end)` row-major pixel ranges.
    pub fn spans(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut pos = 0usize;
        self.runs.iter().enumerate().filter_map(move |(i, &r)| {
            let start = pos;
            pos += r as usize;
            (i % 2 == 1 && r > 0).then_some((start, pos))
        })
    }

    pub fn area(&self) -> usize {
        self.runs
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&r| r as usize)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        if u >= self.width || v >= self.height {
            return false;
        }
        let idx = v as usize * self.width as usize + u as usize;
        self.spans().any(|(s, e)| s <= idx && idx < e)
    }

    /// Tight inclusive bounds `(u_min, v_min, u_max, v_max)`, `None` if empty.
    pub fn bbox(&self) -> Option<[u32; 4]> {
        let w = self.width as usize;
        let mut b: Option<[u32; 4]> = None;
        for (s, e) in self.spans() {
            let (v0, v1) = (s / w, (e - 1) / w);
            let (u0, u1) = if v0 == v1 {
                (s % w, (e - 1) % w)
            } else {
                (0, w - 1)
            };
            let cand = [u0 as u32, v0 as u32, u1 as u32, v1 as u32];
            b = Some(match b {
                None => cand,
                Some(o) => [
                    o[0].min(cand[0]),
                    o[1].min(cand[1]),
                    o[2].max(cand[2]),
                    o[3].max(cand[3]),
                ],
            });
        }
        b
    }

    /// Number of pixels set in both masks. Rasters must share dimensions.
    pub fn intersection_area(&self, other: &Rle) -> usize {
        let mut a = self.spans().peekable();
        let mut b = other.spans().peekable();
        let mut total = 0usize;
        while let (Some(&(s1, e1)), Some(&(s2, e2))) = (a.peek(), b.peek()) {
            let lo = s1.max(s2);
            let hi = e1.min(e2);
            if hi > lo {
                total += hi - lo;
            }
            if e1 <= e2 {
                a.next();
            } else {
                b.next();
            }
        }
        total
    }

    pub fn iou(&self, other: &Rle) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}
