//! Projection round trips against rendered depth and invariance under rigid
//! motion of the whole scene.

use nalgebra::{Rotation3, Unit, Vector3};
use pointprompt_core::camera::{CameraPose, Frame};
use pointprompt_core::projection::{project_point, visibility_test, DEFAULT_OCCLUSION_TOL};
use pointprompt_core::synthetic::{fixtures, render_sequence, NO_INSTANCE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rendered_frames(n: usize) -> Vec<Frame> {
    let spec = fixtures::room8().with_frames(n);
    render_sequence(&spec)
        .unwrap()
        .into_iter()
        .map(|r| r.frame)
        .collect()
}

fn back_project(frame: &Frame, u: u32, v: u32) -> Vector3<f64> {
    let k = &frame.intrinsics;
    let d = frame.depth.get(u, v) as f64;
    let cam = Vector3::new(
        (u as f64 - k.cx) * d / k.fx,
        (v as f64 - k.cy) * d / k.fy,
        d,
    );
    frame.pose.inverse().transform_point(&cam)
}

#[test]
fn back_projected_depth_samples_reproject_within_one_pixel() {
    let frames = rendered_frames(8);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    let mut worst = 0i32;
    while checked < 10_000 {
        let frame = &frames[rng.gen_range(0..frames.len())];
        let (u, v) = (
            rng.gen_range(0..frame.width()),
            rng.gen_range(0..frame.height()),
        );
        if frame.depth.get(u, v) <= 0.0 {
            continue;
        }
        let p = back_project(frame, u, v);
        let proj = project_point(&p, 0, frame);
        assert!(
            proj.valid,
            "sample ({u},{v}) in frame {} fell off the image",
            frame.id
        );
        worst = worst
            .max((proj.u - u as i32).abs())
            .max((proj.v - v as i32).abs());
        assert!(visibility_test(&proj, frame, DEFAULT_OCCLUSION_TOL));
        checked += 1;
    }
    assert!(worst <= 1, "worst reprojection error {worst} px");
}

#[test]
fn depth_pixels_back_project_onto_their_instance_surface() {
    let spec = fixtures::room8().with_frames(4);
    for r in render_sequence(&spec).unwrap() {
        let frame = &r.frame;
        let (mut on_surface, mut total) = (0usize, 0usize);
        for v in 0..frame.height() {
            for u in 0..frame.width() {
                let id = r.instances.get(u, v);
                if frame.depth.get(u, v) <= 0.0 {
                    assert_eq!(id, NO_INSTANCE);
                    continue;
                }
                total += 1;
                let p = back_project(frame, u, v);
                let d = spec
                    .primitives
                    .iter()
                    .filter(|prim| prim.instance == id)
                    .map(|prim| prim.shape.surface_distance(&p))
                    .fold(f64::INFINITY, f64::min);
                if d <= 1e-4 {
                    on_surface += 1;
                }
            }
        }
        assert!(total > 0);
        assert!(
            on_surface as f64 >= 0.99 * total as f64,
            "frame {}: {on_surface}/{total}",
            frame.id
        );
    }
}

fn random_rigid(rng: &mut ChaCha8Rng) -> CameraPose {
    let axis = Unit::new_normalize(Vector3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(0.1..1.0),
    ));
    let rot = Rotation3::from_axis_angle(&axis, rng.gen_range(-3.0..3.0));
    let t = Vector3::new(
        rng.gen_range(-5.0..5.0),
        rng.gen_range(-5.0..5.0),
        rng.gen_range(-5.0..5.0),
    );
    CameraPose::from_parts(*rot.matrix(), t, 1e-9).unwrap()
}

#[test]
fn projection_is_invariant_under_rigid_motion() {
    let frames = rendered_frames(3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..20 {
        let m = random_rigid(&mut rng);
        for frame in &frames {
            // Moving the world by m and the camera with it leaves the view unchanged.
            let moved = Frame::new(
                frame.id,
                frame.intrinsics,
                frame.pose.compose(&m.inverse()),
                frame.depth.clone(),
            )
            .unwrap();
            for _ in 0..500 {
                let p = Vector3::new(
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-0.5..2.5),
                );
                let a = frame.pose.transform_point(&p);
                let b = moved.pose.transform_point(&m.transform_point(&p));
                assert!(
                    (a - b).amax() <= 1e-6,
                    "trial {trial}: camera coordinates differ by {}",
                    (a - b).amax()
                );
                let pa = project_point(&p, 0, frame);
                let pb = project_point(&m.transform_point(&p), 0, &moved);
                assert!((pa.cam_depth - pb.cam_depth).abs() <= 1e-6);
                let k = &frame.intrinsics;
                let near_half = |x: f64| (x - x.floor() - 0.5).abs() < 1e-6;
                if a.z > 0.0
                    && (near_half(k.fx * a.x / a.z + k.cx) || near_half(k.fy * a.y / a.z + k.cy))
                {
                    continue;
                }
                assert_eq!((pa.u, pa.v, pa.valid), (pb.u, pb.v, pb.valid));
                assert_eq!(
                    visibility_test(&pa, frame, 0.05),
                    visibility_test(&pb, &moved, 0.05)
                );
            }
        }
    }
}
