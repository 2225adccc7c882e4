//! Canonical scenes.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::scene::{Primitive, SceneSpec, Trajectory};
use super::shape::Shape;
use crate::camera::CameraIntrinsics;

pub const SCENE_NAMES: [&str; 3] = ["room-8", "big-floor", "clutter-table"];

/// 320×240 pinhole with a 77° horizontal field of view.
pub fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics {
        fx: 200.0,
        fy: 200.0,
        cx: 159.5,
        cy: 119.5,
        width: 320,
        height: 240,
    }
}

pub fn by_name(name: &str) -> Option<SceneSpec> {
    match name {
        "room-8" => Some(room8()),
        "big-floor" => Some(big_floor()),
        "clutter-table" => Some(clutter_table()),
        _ => None,
    }
}

fn prim(instance: u32, shape: Shape) -> Primitive {
    Primitive {
        instance,
        shape,
        points_per_m2: None,
    }
}

fn floor(instance: u32, lo: [f64; 2], hi: [f64; 2], z: f64) -> Primitive {
    prim(
        instance,
        Shape::Plane {
            origin: [lo[0], lo[1], z],
            edge_u: [hi[0] - lo[0], 0.0, 0.0],
            edge_v: [0.0, hi[1] - lo[1], 0.0],
        },
    )
}

/// Four walls of height `h` around `[-a, a]²`, faces pointing inward.
fn walls(first_id: u32, a: f64, h: f64) -> Vec<Primitive> {
    let up = [0.0, 0.0, h];
    let span = 2.0 * a;
    [
        ([-a, -a, 0.0], [span, 0.0, 0.0]),
        ([a, -a, 0.0], [0.0, span, 0.0]),
        ([a, a, 0.0], [-span, 0.0, 0.0]),
        ([-a, a, 0.0], [0.0, -span, 0.0]),
    ]
    .into_iter()
    .enumerate()
    .map(|(i, (origin, edge_u))| {
        prim(
            first_id + i as u32,
            Shape::Plane {
                origin,
                edge_u,
                edge_v: up,
            },
        )
    })
    .collect()
}

fn on_floor_box(instance: u32, x: f64, y: f64, half: [f64; 3], yaw: f64) -> Primitive {
    prim(
        instance,
        Shape::Box {
            center: [x, y, half[2]],
            half_extents: half,
            yaw,
        },
    )
}

fn on_floor_cylinder(
    instance: u32,
    x: f64,
    y: f64,
    radius: f64,
    half_height: f64,
    base: f64,
) -> Primitive {
    prim(
        instance,
        Shape::Cylinder {
            center: [x, y, base + half_height],
            radius,
            half_height,
        },
    )
}

/// Sphere centred on the support plane; the buried half falls inside the
/// plane's solid and is never sampled.
fn dome(instance: u32, x: f64, y: f64, radius: f64, base: f64) -> Primitive {
    prim(
        instance,
        Shape::Sphere {
            center: [x, y, base],
            radius,
        },
    )
}

/// A 6 m square room (floor and four walls) holding eight objects on a ring,
/// seen by an inward-looking orbit.
pub fn room8() -> SceneSpec {
    let a = 3.0;
    let mut primitives = vec![floor(0, [-a, -a], [a, a], 0.0)];
    primitives.extend(walls(1, a, 1.0));
    let r = 1.3;
    let at = |k: usize| {
        let t = core::f64::consts::PI * k as f64 / 4.0;
        (r * libm::cos(t), r * libm::sin(t))
    };
    let objects = [
        on_floor_box(10, at(0).0, at(0).1, [0.3, 0.25, 0.3], 0.3),
        dome(11, at(1).0, at(1).1, 0.35, 0.0),
        on_floor_cylinder(12, at(2).0, at(2).1, 0.22, 0.35, 0.0),
        on_floor_box(13, at(3).0, at(3).1, [0.35, 0.2, 0.2], -0.5),
        on_floor_cylinder(14, at(4).0, at(4).1, 0.3, 0.2, 0.0),
        on_floor_box(15, at(5).0, at(5).1, [0.2, 0.2, 0.4], 0.8),
        dome(16, at(6).0, at(6).1, 0.3, 0.0),
        on_floor_box(17, at(7).0, at(7).1, [0.4, 0.3, 0.15], 0.0),
    ];
    primitives.extend(objects);
    SceneSpec {
        name: "room-8".to_string(),
        room: [[-a, -a, -0.5], [a, a, 2.5]],
        points_per_m2: 960.0,
        primitives,
        trajectory: Trajectory::Orbit {
            target: [0.0, 0.0, 0.3],
            radius: 2.2,
            height: 2.0,
            frames: 40,
            phase: 0.0,
        },
        intrinsics: default_intrinsics(),
        seed: 8,
    }
}

/// An 18 m × 3 m floor with a few objects, filmed by a camera sliding along
/// its long side; no single view covers more than a third of the floor.
pub fn big_floor() -> SceneSpec {
    let mut primitives = vec![floor(0, [0.0, -1.5], [18.0, 1.5], 0.0)];
    primitives.extend([
        on_floor_box(1, 3.0, 0.3, [0.3, 0.3, 0.3], 0.2),
        on_floor_cylinder(2, 9.0, -0.4, 0.3, 0.35, 0.0),
        on_floor_box(3, 15.0, 0.2, [0.35, 0.25, 0.25], -0.4),
    ]);
    SceneSpec {
        name: "big-floor".to_string(),
        room: [[0.0, -1.5, 0.0], [18.0, 1.5, 2.0]],
        points_per_m2: 600.0,
        primitives,
        trajectory: Trajectory::Linear {
            start: [0.5, -2.5, 1.5],
            end: [17.5, -2.5, 1.5],
            look: [0.0, 3.0, -2.0],
            frames: 40,
        },
        intrinsics: default_intrinsics(),
        seed: 12,
    }
}

/// A table top holding a grid of small objects, each under 1000 points,
/// circled by an orbit. There is no floor.
pub fn clutter_table() -> SceneSpec {
    let z = 0.75;
    let mut table = floor(0, [-0.6, -0.4], [0.6, 0.4], z);
    table.points_per_m2 = Some(6000.0);
    let mut primitives = vec![table];
    let mut id = 1;
    for (row, y) in [-0.25, 0.0, 0.25].into_iter().enumerate() {
        for (col, x) in [-0.42, -0.14, 0.14, 0.42].into_iter().enumerate() {
            let p = match (row + col) % 3 {
                0 => prim(
                    id,
                    Shape::Box {
                        center: [x, y, z + 0.08],
                        half_extents: [0.06, 0.05, 0.08],
                        yaw: 0.3 * col as f64,
                    },
                ),
                1 => on_floor_cylinder(id, x, y, 0.045, 0.08, z),
                _ => dome(id, x, y, 0.09, z),
            };
            primitives.push(p);
            id += 1;
        }
    }
    SceneSpec {
        name: "clutter-table".to_string(),
        room: [[-1.0, -1.0, 0.0], [1.0, 1.0, 1.5]],
        points_per_m2: 10000.0,
        primitives,
        trajectory: Trajectory::Orbit {
            target: [0.0, 0.0, z],
            radius: 1.0,
            height: z + 0.3,
            frames: 40,
            phase: 0.1,
        },
        intrinsics: default_intrinsics(),
        seed: 21,
    }
}
