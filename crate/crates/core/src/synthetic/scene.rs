//! Scene descriptions, labeled point sampling and ray-cast rendering.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use libm::{cos, round, sin};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::raster::{InstanceRaster, NO_INSTANCE};
use super::shape::Shape;
use crate::camera::{CameraError, CameraIntrinsics, CameraPose, DepthMap, Frame, POSE_TOLERANCE};
use crate::cloud::PointCloud;
use crate::eval::GroundTruth;
use crate::mask::mix64;

/// Sampled points this close to another primitive's solid are dropped, which
/// removes contact faces that no camera can see.
pub const SOLID_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("primitive of instance {0} has zero area or invalid dimensions")]
    DegeneratePrimitive(u32),
    #[error("instance id {0} used twice")]
    DuplicateInstance(u32),
    #[error("instance id {0} is reserved")]
    ReservedInstance(u32),
    #[error("primitive of instance {0} extends outside the room")]
    OutsideRoom(u32),
    #[error("trajectory has no frames")]
    EmptyTrajectory,
    #[error("invalid trajectory: {0}")]
    BadTrajectory(&'static str),
    #[error("sampling density must be positive and finite")]
    BadDensity,
    #[error(transparent)]
    Camera(#[from] CameraError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub instance: u32,
    pub shape: Shape,
    /// Overrides the scene density for this primitive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_per_m2: Option<f64>,
}

/// Camera path; every variant yields world-to-camera poses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    /// Cameras evenly spaced on a horizontal circle, all looking at `target`.
    Orbit {
        target: [f64; 3],
        radius: f64,
        height: f64,
        frames: usize,
        #[serde(default)]
        phase: f64,
    },
    /// Cameras evenly spaced from `start` to `end`, each looking along `look`.
    Linear {
        start: [f64; 3],
        end: [f64; 3],
        look: [f64; 3],
        frames: usize,
    },
    /// Row-major world-to-camera matrices.
    Explicit { poses: Vec<[[f64; 4]; 4]> },
}

impl Trajectory {
    pub fn len(&self) -> usize {
        match self {
            Trajectory::Orbit { frames, .. } | Trajectory::Linear { frames, .. } => *frames,
            Trajectory::Explicit { poses } => poses.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same path sampled with `n` frames; explicit paths are truncated.
    pub fn with_frames(&self, n: usize) -> Self {
        let mut t = self.clone();
        match &mut t {
            Trajectory::Orbit { frames, .. } | Trajectory::Linear { frames, .. } => *frames = n,
            Trajectory::Explicit { poses } => poses.truncate(n),
        }
        t
    }

    pub fn poses(&self) -> Result<Vec<CameraPose>, SceneError> {
        let up = Vector3::new(0.0, 0.0, 1.0);
        let v = |a: [f64; 3]| Vector3::new(a[0], a[1], a[2]);
        let degenerate = SceneError::BadTrajectory("viewing direction parallel to up");
        match self {
            Trajectory::Orbit {
                target,
                radius,
                height,
                frames,
                phase,
            } => (0..*frames)
                .map(|i| {
                    let a = phase + 2.0 * core::f64::consts::PI * i as f64 / *frames as f64;
                    let eye = Vector3::new(
                        target[0] + radius * cos(a),
                        target[1] + radius * sin(a),
                        *height,
                    );
                    CameraPose::look_at(eye, v(*target), up).ok_or(degenerate.clone())
                })
                .collect(),
            Trajectory::Linear {
                start,
                end,
                look,
                frames,
            } => (0..*frames)
                .map(|i| {
                    let f = if *frames > 1 {
                        i as f64 / (*frames - 1) as f64
                    } else {
                        0.0
                    };
                    let eye = v(*start) + f * (v(*end) - v(*start));
                    CameraPose::look_at(eye, eye + v(*look), up).ok_or(degenerate.clone())
                })
                .collect(),
            Trajectory::Explicit { poses } => poses
                .iter()
                .map(|m| CameraPose::from_matrix(m, POSE_TOLERANCE).map_err(SceneError::from))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub name: String,
    /// Room bounds `[min, max]`; every primitive lies inside.
    pub room: [[f64; 3]; 2],
    pub points_per_m2: f64,
    pub primitives: Vec<Primitive>,
    pub trajectory: Trajectory,
    pub intrinsics: CameraIntrinsics,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.points_per_m2.is_finite() && self.points_per_m2 > 0.0) {
            return Err(SceneError::BadDensity);
        }
        let mut seen = Vec::new();
        for p in &self.primitives {
            if p.instance == NO_INSTANCE {
                return Err(SceneError::ReservedInstance(p.instance));
            }
            if seen.contains(&p.instance) {
                return Err(SceneError::DuplicateInstance(p.instance));
            }
            seen.push(p.instance);
            if p.shape.is_degenerate() {
                return Err(SceneError::DegeneratePrimitive(p.instance));
            }
            if let Some(d) = p.points_per_m2 {
                if !(d.is_finite() && d > 0.0) {
                    return Err(SceneError::BadDensity);
                }
            }
            let (lo, hi) = p.shape.bounds();
            let [rlo, rhi] = self.room;
            if (0..3).any(|k| lo[k] < rlo[k] - 1e-9 || hi[k] > rhi[k] + 1e-9) {
                return Err(SceneError::OutsideRoom(p.instance));
            }
        }
        if self.trajectory.is_empty() {
            return Err(SceneError::EmptyTrajectory);
        }
        self.intrinsics.validate()?;
        Ok(())
    }

    pub fn with_frames(&self, n: usize) -> Self {
        Self {
            trajectory: self.trajectory.with_frames(n),
            ..self.clone()
        }
    }

    pub fn instance_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.primitives.iter().map(|p| p.instance).collect();
        ids.sort_unstable();
        ids
    }
}

/// Display color of an instance.
pub fn instance_color(id: u32) -> [u8; 3] {
    let h = mix64(id as u64 ^ 0xC0_10);
    [
        (h >> 8) as u8 | 0x20,
        (h >> 24) as u8 | 0x20,
        (h >> 40) as u8 | 0x20,
    ]
}

/// Area-weighted uniform samples of every primitive, labeled with its
/// instance id. Each primitive draws from its own seeded stream.
pub fn sample_cloud(spec: &SceneSpec) -> Result<(PointCloud, GroundTruth), SceneError> {
    spec.validate()?;
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    let mut labels = Vec::new();
    for (k, prim) in spec.primitives.iter().enumerate() {
        let density = prim.points_per_m2.unwrap_or(spec.points_per_m2);
        let n = round(prim.shape.area() * density) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(spec.seed ^ mix64(k as u64 + 1)));
        let color = instance_color(prim.instance);
        for _ in 0..n {
            let p = prim.shape.sample_point(&mut rng);
            let buried = spec
                .primitives
                .iter()
                .enumerate()
                .any(|(j, o)| j != k && o.shape.contains(&p, SOLID_EPS));
            if !buried {
                positions.push([p.x as f32, p.y as f32, p.z as f32]);
                colors.push(color);
                labels.push(prim.instance);
            }
        }
    }
    let cloud = PointCloud::new(positions, Some(colors))
        .map_err(|_| SceneError::DegeneratePrimitive(NO_INSTANCE))?;
    Ok((cloud, GroundTruth::new(labels)))
}

/// Depth and instance ids of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub frame: Frame,
    pub instances: InstanceRaster,
}

/// Casts one ray per pixel center; the nearest hit sets depth and id. Pixels
/// without a hit have depth 0 and [`NO_INSTANCE`].
pub fn render_frame(
    spec: &SceneSpec,
    frame_id: u32,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
) -> Result<RenderedFrame, SceneError> {
    intrinsics.validate()?;
    let (w, h) = (intrinsics.width, intrinsics.height);
    let eye = pose.center();
    let rt = pose.rotation().transpose();
    let mut depth = vec![0f32; w as usize * h as usize];
    let mut ids = vec![NO_INSTANCE; w as usize * h as usize];
    for v in 0..h {
        for u in 0..w {
            // Camera-space direction with unit z, so the ray parameter is depth.
            let dc = Vector3::new(
                (u as f64 - intrinsics.cx) / intrinsics.fx,
                (v as f64 - intrinsics.cy) / intrinsics.fy,
                1.0,
            );
            let dir = rt * dc;
            let mut best = (f64::INFINITY, NO_INSTANCE);
            for prim in &spec.primitives {
                if let Some(t) = prim.shape.intersect(&eye, &dir) {
                    if t < best.0 || (t == best.0 && prim.instance < best.1) {
                        best = (t, prim.instance);
                    }
                }
            }
            if best.1 != NO_INSTANCE {
                let i = v as usize * w as usize + u as usize;
                depth[i] = best.0 as f32;
                ids[i] = best.1;
            }
        }
    }
    let depth = DepthMap::new(w, h, depth)?;
    let frame = Frame::new(frame_id, *intrinsics, *pose, depth)?;
    let instances = InstanceRaster::new(w, h, ids).expect("raster sized from intrinsics");
    Ok(RenderedFrame { frame, instances })
}

/// Renders every trajectory pose; frame ids count from 0.
pub fn render_sequence(spec: &SceneSpec) -> Result<Vec<RenderedFrame>, SceneError> {
    spec.validate()?;
    spec.trajectory
        .poses()?
        .iter()
        .enumerate()
        .map(|(i, pose)| render_frame(spec, i as u32, pose, &spec.intrinsics))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn unit_box_scene(density: f64) -> SceneSpec {
        SceneSpec {
            name: "unit".to_string(),
            room: [[-5.0; 3], [5.0; 3]],
            points_per_m2: density,
            primitives: vec![Primitive {
                instance: 0,
                shape: Shape::Box {
                    center: [0.0; 3],
                    half_extents: [0.5; 3],
                    yaw: 0.0,
                },
                points_per_m2: None,
            }],
            trajectory: Trajectory::Orbit {
                target: [0.0; 3],
                radius: 3.0,
                height: 1.0,
                frames: 4,
                phase: 0.0,
            },
            intrinsics: CameraIntrinsics::new(100.0, 100.0, 31.5, 23.5, 64, 48).unwrap(),
            seed: 9,
        }
    }

    #[test]
    fn unit_box_point_count() {
        for d in [100.0, 1000.0, 2500.0] {
            let (cloud, gt) = sample_cloud(&unit_box_scene(d)).unwrap();
            let n = cloud.len() as f64;
            assert!((n - 6.0 * d).abs() <= 0.05 * 6.0 * d);
            assert!(gt.labels().iter().all(|&l| l == 0));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = unit_box_scene(500.0);
        assert_eq!(sample_cloud(&s).unwrap(), sample_cloud(&s).unwrap());
        let mut other = s.clone();
        other.seed += 1;
        assert_ne!(sample_cloud(&s).unwrap().0, sample_cloud(&other).unwrap().0);
    }

    #[test]
    fn validation_errors() {
        let mut s = unit_box_scene(10.0);
        s.primitives.push(s.primitives[0]);
        assert_eq!(s.validate(), Err(SceneError::DuplicateInstance(0)));
        let mut s = unit_box_scene(10.0);
        s.primitives[0].shape = Shape::Sphere {
            center: [0.0; 3],
            radius: 0.0,
        };
        assert_eq!(
            sample_cloud(&s).unwrap_err(),
            SceneError::DegeneratePrimitive(0)
        );
        let mut s = unit_box_scene(10.0);
        s.primitives[0].shape = Shape::Sphere {
            center: [4.8, 0.0, 0.0],
            radius: 0.5,
        };
        assert_eq!(s.validate(), Err(SceneError::OutsideRoom(0)));
        assert_eq!(
            unit_box_scene(10.0).with_frames(0).validate(),
            Err(SceneError::EmptyTrajectory)
        );
    }

    #[test]
    fn contact_faces_are_removed() {
        let mut s = unit_box_scene(2000.0);
        s.primitives.push(Primitive {
            instance: 1,
            shape: Shape::Plane {
                origin: [-2.0, -2.0, -0.5],
                edge_u: [4.0, 0.0, 0.0],
                edge_v: [0.0, 4.0, 0.0],
            },
            points_per_m2: Some(10.0),
        });
        let (cloud, gt) = sample_cloud(&s).unwrap();
        for (p, &l) in cloud.positions().iter().zip(gt.labels()) {
            if l == 0 {
                assert!(p[2] > -0.499, "bottom face must be dropped");
            }
        }
        let boxed = gt.labels().iter().filter(|&&l| l == 0).count() as f64;
        assert!((boxed - 5.0 * 2000.0).abs() < 0.05 * 10000.0);
    }

    #[test]
    fn wall_two_meters_ahead() {
        let mut s = unit_box_scene(10.0);
        s.primitives[0].shape = Shape::Plane {
            origin: [-4.0, -4.0, 2.0],
            edge_u: [8.0, 0.0, 0.0],
            edge_v: [0.0, 8.0, 0.0],
        };
        let k = CameraIntrinsics::new(50.0, 50.0, 32.0, 24.0, 64, 48).unwrap();
        let r = render_frame(&s, 0, &CameraPose::identity(), &k).unwrap();
        assert_eq!(r.frame.depth.get(32, 24), 2.0);
        assert_eq!(r.instances.get(32, 24), 0);
    }

    #[test]
    fn occluded_sphere_is_absent() {
        let mut s = unit_box_scene(10.0);
        s.primitives.push(Primitive {
            instance: 7,
            shape: Shape::Sphere {
                center: [0.0, 0.0, 4.0],
                radius: 0.3,
            },
            points_per_m2: None,
        });
        s.primitives[0].shape = Shape::Box {
            center: [0.0, 0.0, 2.0],
            half_extents: [1.5, 1.5, 0.5],
            yaw: 0.0,
        };
        let k = CameraIntrinsics::new(50.0, 50.0, 32.0, 24.0, 64, 48).unwrap();
        let r = render_frame(&s, 0, &CameraPose::identity(), &k).unwrap();
        assert!(!r.instances.ids().contains(&7));
        assert_eq!(r.frame.depth.get(32, 24), 1.5);
    }

    #[test]
    fn orbit_looks_at_target() {
        let s = unit_box_scene(10.0);
        for pose in s.trajectory.poses().unwrap() {
            let c = pose.transform_point(&Vector3::zeros());
            assert!(c.x.abs() < 1e-12 && c.y.abs() < 1e-12 && c.z > 0.0);
        }
    }
}
