//! Per-pixel instance ids of a rendered frame.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use thiserror::Error;

use crate::camera::resample_nearest;

/// Pixel showing no instance.
pub const NO_INSTANCE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("instance raster {width}x{height} needs {expected} ids, got {got}")]
pub struct RasterSizeError {
    pub width: u32,
    pub height: u32,
    pub expected: usize,
    pub got: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceRaster {
    width: u32,
    height: u32,
    ids: Vec<u32>,
}

impl InstanceRaster {
    pub fn new(width: u32, height: u32, ids: Vec<u32>) -> Result<Self, RasterSizeError> {
        let expected = width as usize * height as usize;
        if ids.len() != expected {
            return Err(RasterSizeError {
                width,
                height,
                expected,
                got: ids.len(),
            });
        }
        Ok(Self { width, height, ids })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Row-major ids.
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn get(&self, u: u32, v: u32) -> u32 {
        self.ids[v as usize * self.width as usize + u as usize]
    }

    pub fn resized(&self, width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            ids: resample_nearest(&self.ids, self.width, self.height, width, height),
        }
    }

    /// Distinct instance ids present, ascending.
    pub fn instances(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self
            .ids
            .iter()
            .copied()
            .filter(|&i| i != NO_INSTANCE)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Instances sharing a 4-connected pixel border, each list ascending.
    pub fn adjacency(&self) -> BTreeMap<u32, Vec<u32>> {
        let mut adj: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        let (w, h) = (self.width as usize, self.height as usize);
        let mut link = |a: u32, b: u32| {
            if a != b && a != NO_INSTANCE && b != NO_INSTANCE {
                adj.entry(a).or_default().push(b);
                adj.entry(b).or_default().push(a);
            }
        };
        for y in 0..h {
            for x in 0..w {
                let a = self.ids[y * w + x];
                if x + 1 < w {
                    link(a, self.ids[y * w + x + 1]);
                }
                if y + 1 < h {
                    link(a, self.ids[(y + 1) * w + x]);
                }
            }
        }
        for v in adj.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        adj
    }
}
