//! Pinhole intrinsics, rigid world-to-camera poses, depth maps and frames.
//!
//! Camera coordinates follow the usual computer-vision convention: +X right,
//! +Y down, +Z along the optical axis.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{Matrix3, Matrix4, Vector3};
use thiserror::Error;

/// Tolerance on `R·Rᵀ = I`, `det R = 1` and the homogeneous row of a
/// constructed pose.
pub const POSE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    #[error("invalid intrinsics: {0}")]
    BadIntrinsics(&'static str),
    #[error("transform is not rigid (deviation {deviation:.3e})")]
    NonRigid { deviation: f64 },
    #[error("transform is a reflection (det R = {det:.6})")]
    Reflection { det: f64 },
    #[error("depth map has {got} values, expected {expected}")]
    DepthLength { expected: usize, got: usize },
    #[error("depth value at index {index} is negative or non-finite")]
    BadDepth { index: usize },
    #[error("depth is {depth_w}x{depth_h} but intrinsics are {width}x{height}")]
    DimensionMismatch {
        depth_w: u32,
        depth_h: u32,
        width: u32,
        height: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, CameraError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.fx.is_finite() && self.fy.is_finite() && self.fx > 0.0 && self.fy > 0.0) {
            return Err(CameraError::BadIntrinsics("focal lengths must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::BadIntrinsics("image size must be non-zero"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64)
            || !(self.cy >= 0.0 && self.cy < self.height as f64)
        {
            return Err(CameraError::BadIntrinsics(
                "principal point outside the image",
            ));
        }
        Ok(())
    }

    /// Linear rescale to a new image size.
    pub fn rescaled(&self, width: u32, height: u32) -> Self {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// A rigid world-to-camera transform `x_cam = R·x_world + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl CameraPose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Builds a pose from a row-major 4×4 matrix, rejecting anything whose
    /// rigidity deviates by more than `tol`.
    pub fn from_matrix(m: &[[f64; 4]; 4], tol: f64) -> Result<Self, CameraError> {
        let m4 = Matrix4::from_fn(|r, c| m[r][c]);
        if !m4.iter().all(|v| v.is_finite()) {
            return Err(CameraError::NonRigid {
                deviation: f64::INFINITY,
            });
        }
        let bottom = [m[3][0], m[3][1], m[3][2], m[3][3] - 1.0];
        let bottom_dev = bottom.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let rotation = m4.fixed_view::<3, 3>(0, 0).into_owned();
        let translation = Vector3::new(m[0][3], m[1][3], m[2][3]);
        let pose = Self::from_parts(rotation, translation, tol)?;
        if bottom_dev > tol {
            return Err(CameraError::NonRigid {
                deviation: bottom_dev,
            });
        }
        Ok(pose)
    }

    pub fn from_parts(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        tol: f64,
    ) -> Result<Self, CameraError> {
        let det = rotation.determinant();
        if det < 0.0 {
            return Err(CameraError::Reflection { det });
        }
        let ortho = rotation * rotation.transpose() - Matrix3::identity();
        let deviation = ortho.iter().fold((det - 1.0).abs(), |a, v| a.max(v.abs()));
        if deviation.is_nan() || deviation > tol || !translation.iter().all(|v| v.is_finite()) {
            return Err(CameraError::NonRigid { deviation });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Camera at `eye` looking at `target`; `up` is the world up direction.
    ///
    /// Returns `None` when the viewing direction is parallel to `up`.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Option<Self> {
        let forward = (target - eye).try_normalize(1e-12)?;
        let right = forward.cross(&up).try_normalize(1e-12)?;
        let down = forward.cross(&right);
        let rotation =
            Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        Some(Self {
            rotation,
            translation,
        })
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[inline]
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

/// Per-pixel metric depth, row-major. Zero marks missing depth.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self, CameraError> {
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(CameraError::DepthLength {
                expected,
                got: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(CameraError::BadDepth { index });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> f32 {
        self.data[v as usize * self.width as usize + u as usize]
    }

    /// Nearest-neighbour resample.
    pub fn resized(&self, width: u32, height: u32) -> Self {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let data = resample_nearest(&self.data, self.width, self.height, width, height);
        Self {
            width,
            height,
            data,
        }
    }
}

/// Nearest-neighbour resample of a row-major raster, sampling source pixel
/// centers.
pub fn resample_nearest<T: Copy>(src: &[T], sw: u32, sh: u32, dw: u32, dh: u32) -> Vec<T> {
    let mut out = Vec::with_capacity(dw as usize * dh as usize);
    for y in 0..dh {
        let sy = (((y as f64 + 0.5) * sh as f64 / dh as f64) as u32).min(sh - 1);
        for x in 0..dw {
            let sx = (((x as f64 + 0.5) * sw as f64 / dw as f64) as u32).min(sw - 1);
            out.push(src[sy as usize * sw as usize + sx as usize]);
        }
    }
    out
}

/// One posed RGB-D view.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: u32,
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
    pub depth: DepthMap,
}

impl Frame {
    pub fn new(
        id: u32,
        intrinsics: CameraIntrinsics,
        pose: CameraPose,
        depth: DepthMap,
    ) -> Result<Self, CameraError> {
        intrinsics.validate()?;
        if depth.width != intrinsics.width || depth.height != intrinsics.height {
            return Err(CameraError::DimensionMismatch {
                depth_w: depth.width,
                depth_h: depth.height,
                width: intrinsics.width,
                height: intrinsics.height,
            });
        }
        Ok(Self {
            id,
            intrinsics,
            pose,
            depth,
        })
    }

    pub fn width(&self) -> u32 {
        self.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.intrinsics.height
    }

    /// Resamples the depth map and rescales the intrinsics to `width`×`height`.
    pub fn resized(&self, width: u32, height: u32) -> Self {
        Self {
            id: self.id,
            intrinsics: self.intrinsics.rescaled(width, height),
            pose: self.pose,
            depth: self.depth.resized(width, height),
        }
    }
}
