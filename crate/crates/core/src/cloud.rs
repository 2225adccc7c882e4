//! Scene point clouds.

use alloc::vec::Vec;
use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CloudError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("point {index} has a non-finite coordinate")]
    NonFiniteCoordinate { index: usize },
    #[error("color array has {colors} entries but the cloud has {points} points")]
    ColorLengthMismatch { points: usize, colors: usize },
}

/// A set of world-frame points (meters) with optional per-point RGB.
///
/// Positions are stored as `f32`, the precision of the on-disk format, so a
/// load/save cycle is lossless. Geometry is computed in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<[f32; 3]>,
    colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(positions: Vec<[f32; 3]>, colors: Option<Vec<[u8; 3]>>) -> Result<Self, CloudError> {
        if positions.is_empty() {
            return Err(CloudError::EmptyCloud);
        }
        if let Some(index) = positions
            .iter()
            .position(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(CloudError::NonFiniteCoordinate { index });
        }
        if let Some(colors) = &colors {
            if colors.len() != positions.len() {
                return Err(CloudError::ColorLengthMismatch {
                    points: positions.len(),
                    colors: colors.len(),
                });
            }
        }
        Ok(Self { positions, colors })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    /// Always false for a constructed cloud; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f32; 3]] {
        &self.positions
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    #[inline]
    pub fn point(&self, index: usize) -> Vector3<f64> {
        let [x, y, z] = self.positions[index];
        Vector3::new(x as f64, y as f64, z as f64)
    }

    pub fn iter_points(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.positions
            .iter()
            .map(|&[x, y, z]| Vector3::new(x as f64, y as f64, z as f64))
    }

    /// Applies `f` to every position, rounding the result back to `f32`.
    pub fn map_positions(&self, mut f: impl FnMut(Vector3<f64>) -> Vector3<f64>) -> Self {
        let positions = self
            .iter_points()
            .map(|p| {
                let q = f(p);
                [q.x as f32, q.y as f32, q.z as f32]
            })
            .collect();
        Self {
            positions,
            colors: self.colors.clone(),
        }
    }
}
