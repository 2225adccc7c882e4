//! World point → pixel projection and the depth occlusion test.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::Vector3;
use thiserror::Error;

use crate::camera::Frame;
use crate::cloud::PointCloud;

/// Default tolerance (meters) between a point's camera depth and the depth
/// map for the point to count as visible.
pub const DEFAULT_OCCLUSION_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProjectionError {
    #[error("point index {index} out of range for a cloud of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelProjection {
    pub frame_id: u32,
    pub point_index: u32,
    pub u: i32,
    pub v: i32,
    /// Z in camera coordinates.
    pub cam_depth: f64,
    pub valid: bool,
}

impl PixelProjection {
    /// Row-major pixel index; only meaningful when `valid`.
    #[inline]
    pub fn pixel_index(&self, width: u32) -> usize {
        self.v as usize * width as usize + self.u as usize
    }
}

/// Pinhole projection rounded half away from zero to the nearest pixel.
/// `valid` is false behind the camera or outside the image.
pub fn project_point(p: &Vector3<f64>, point_index: u32, frame: &Frame) -> PixelProjection {
    let cam = frame.pose.transform_point(p);
    let k = &frame.intrinsics;
    let mut proj = PixelProjection {
        frame_id: frame.id,
        point_index,
        u: 0,
        v: 0,
        cam_depth: cam.z,
        valid: false,
    };
    if cam.z.is_nan() || cam.z <= 0.0 {
        return proj;
    }
    let uf = libm::round(k.fx * cam.x / cam.z + k.cx);
    let vf = libm::round(k.fy * cam.y / cam.z + k.cy);
    proj.u = uf as i32;
    proj.v = vf as i32;
    proj.valid = uf >= 0.0 && vf >= 0.0 && uf < k.width as f64 && vf < k.height as f64;
    proj
}

/// True iff the depth map holds a measurement at the projected pixel and it
/// agrees with the point's camera depth within `tol`.
pub fn visibility_test(proj: &PixelProjection, frame: &Frame, tol: f64) -> bool {
    if !proj.valid {
        return false;
    }
    let d = frame.depth.get(proj.u as u32, proj.v as u32) as f64;
    d > 0.0 && (proj.cam_depth - d).abs() <= tol
}

/// Projects the listed points; `valid` on each result is the conjunction of
/// in-image and visible.
pub fn project_batch(
    indices: &[u32],
    cloud: &PointCloud,
    frame: &Frame,
    tol: f64,
) -> Result<Vec<PixelProjection>, ProjectionError> {
    let len = cloud.len();
    indices
        .iter()
        .map(|&i| {
            if i as usize >= len {
                return Err(ProjectionError::IndexOutOfRange {
                    index: i as usize,
                    len,
                });
            }
            let mut proj = project_point(&cloud.point(i as usize), i, frame);
            proj.valid = visibility_test(&proj, frame, tol);
            Ok(proj)
        })
        .collect()
}

/// Visible points of one frame bucketed by pixel (compressed rows).
#[derive(Debug, Clone)]
pub struct FrameVisibility {
    pub frame_id: u32,
    pub width: u32,
    pub height: u32,
    offsets: Vec<u32>,
    points: Vec<u32>,
    pixel_of_point: Vec<u32>,
}

pub const NOT_VISIBLE: u32 = u32::MAX;

impl FrameVisibility {
    pub fn compute(cloud: &PointCloud, frame: &Frame, tol: f64) -> Self {
        let width = frame.width();
        let pixels = frame.intrinsics.pixel_count();
        let mut pixel_of_point = vec![NOT_VISIBLE; cloud.len()];
        let mut counts = vec![0u32; pixels + 1];
        for (i, p) in cloud.iter_points().enumerate() {
            let proj = project_point(&p, i as u32, frame);
            if visibility_test(&proj, frame, tol) {
                let px = proj.pixel_index(width);
                pixel_of_point[i] = px as u32;
                counts[px + 1] += 1;
            }
        }
        for i in 0..pixels {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut points = vec![0u32; counts[pixels] as usize];
        for (i, &px) in pixel_of_point.iter().enumerate() {
            if px != NOT_VISIBLE {
                let slot = &mut cursor[px as usize];
                points[*slot as usize] = i as u32;
                *slot += 1;
            }
        }
        Self {
            frame_id: frame.id,
            width,
            height: frame.height(),
            offsets: counts,
            points,
            pixel_of_point,
        }
    }

    /// Visible points whose projection falls in the pixel range `[start, end)`.
    #[inline]
    pub fn points_in_span(&self, start: usize, end: usize) -> &[u32] {
        &self.points[self.offsets[start] as usize..self.offsets[end] as usize]
    }

    /// Pixel index of a point, or [`NOT_VISIBLE`].
    #[inline]
    pub fn pixel_of(&self, point: usize) -> u32 {
        self.pixel_of_point[point]
    }

    pub fn visible_count(&self) -> usize {
        self.points.len()
    }
}
