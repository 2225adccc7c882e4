//! Analytic primitives: area, surface sampling, ray casting, solidity.

use alloc::vec::Vec;
use core::f64::consts::PI;
use libm::{cos, fabs, sin, sqrt};
use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Thickness of the solid slab behind a plane rectangle.
pub const PLANE_SLAB: f64 = 0.5;
/// Rays ignore hits closer than this.
const T_MIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Box rotated by `yaw` radians about the vertical axis.
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
        #[serde(default)]
        yaw: f64,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    /// Cylinder with a vertical axis through `center`.
    Cylinder {
        center: [f64; 3],
        radius: f64,
        half_height: f64,
    },
    /// Rectangle `origin + s·edge_u + t·edge_v`, `s, t ∈ [0, 1]`. Its solid is
    /// a slab of [`PLANE_SLAB`] behind the face, opposite `edge_u × edge_v`.
    Plane {
        origin: [f64; 3],
        edge_u: [f64; 3],
        edge_v: [f64; 3],
    },
}

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

fn norm(v: &Vector3<f64>) -> f64 {
    sqrt(v.dot(v))
}

/// World → box-local rotation about z.
fn to_local(p: Vector3<f64>, yaw: f64) -> Vector3<f64> {
    let (s, c) = (sin(yaw), cos(yaw));
    Vector3::new(c * p.x + s * p.y, -s * p.x + c * p.y, p.z)
}

fn to_world(p: Vector3<f64>, yaw: f64) -> Vector3<f64> {
    to_local(p, -yaw)
}

impl Shape {
    pub fn area(&self) -> f64 {
        match *self {
            Shape::Box {
                half_extents: h, ..
            } => 8.0 * (h[0] * h[1] + h[1] * h[2] + h[0] * h[2]),
            Shape::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            Shape::Cylinder {
                radius,
                half_height,
                ..
            } => 4.0 * PI * radius * half_height + 2.0 * PI * radius * radius,
            Shape::Plane { edge_u, edge_v, .. } => norm(&v3(edge_u).cross(&v3(edge_v))),
        }
    }

    /// True unless every dimension is finite and non-negative and the area is
    /// positive.
    pub fn is_degenerate(&self) -> bool {
        let finite = |a: &[f64]| a.iter().all(|v| v.is_finite());
        let ok = match self {
            Shape::Box {
                center,
                half_extents,
                yaw,
            } => {
                finite(center)
                    && finite(half_extents)
                    && yaw.is_finite()
                    && half_extents.iter().all(|h| *h >= 0.0)
            }
            Shape::Sphere { center, radius } => {
                finite(center) && radius.is_finite() && *radius >= 0.0
            }
            Shape::Cylinder {
                center,
                radius,
                half_height,
            } => {
                finite(center)
                    && radius.is_finite()
                    && half_height.is_finite()
                    && *radius >= 0.0
                    && *half_height >= 0.0
            }
            Shape::Plane {
                origin,
                edge_u,
                edge_v,
            } => finite(origin) && finite(edge_u) && finite(edge_v),
        };
        !(ok && self.area() > 0.0)
    }

    /// Axis-aligned bounds `(min, max)` of the surface.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let (c, h) = match *self {
            Shape::Box {
                center,
                half_extents: h,
                yaw,
            } => {
                let (s, co) = (fabs(sin(yaw)), fabs(cos(yaw)));
                (center, [co * h[0] + s * h[1], s * h[0] + co * h[1], h[2]])
            }
            Shape::Sphere { center, radius } => (center, [radius; 3]),
            Shape::Cylinder {
                center,
                radius,
                half_height,
            } => (center, [radius, radius, half_height]),
            Shape::Plane {
                origin,
                edge_u,
                edge_v,
            } => {
                let mut lo = origin;
                let mut hi = origin;
                for k in 0..3 {
                    for corner in [edge_u[k], edge_v[k], edge_u[k] + edge_v[k]] {
                        lo[k] = lo[k].min(origin[k] + corner);
                        hi[k] = hi[k].max(origin[k] + corner);
                    }
                }
                return (lo, hi);
            }
        };
        (
            [c[0] - h[0], c[1] - h[1], c[2] - h[2]],
            [c[0] + h[0], c[1] + h[1], c[2] + h[2]],
        )
    }

    /// One point drawn uniformly (by area) from the surface.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Vector3<f64> {
        let mut u = || rng.gen::<f64>();
        match *self {
            Shape::Box {
                center,
                half_extents: h,
                yaw,
            } => {
                let areas = [h[1] * h[2], h[0] * h[2], h[0] * h[1]];
                let pick = u() * 2.0 * (areas[0] + areas[1] + areas[2]);
                let (axis, sign) = {
                    let mut acc = 0.0;
                    let mut chosen = (2, 1.0);
                    'outer: for (axis, a) in areas.iter().enumerate() {
                        for sign in [1.0, -1.0] {
                            acc += a;
                            if pick < acc {
                                chosen = (axis, sign);
                                break 'outer;
                            }
                        }
                    }
                    chosen
                };
                let mut local = Vector3::zeros();
                for k in 0..3 {
                    local[k] = if k == axis {
                        sign * h[k]
                    } else {
                        (2.0 * u() - 1.0) * h[k]
                    };
                }
                to_world(local, yaw) + v3(center)
            }
            Shape::Sphere { center, radius } => {
                let z = 2.0 * u() - 1.0;
                let phi = 2.0 * PI * u();
                let rho = sqrt((1.0 - z * z).max(0.0));
                v3(center) + radius * Vector3::new(rho * cos(phi), rho * sin(phi), z)
            }
            Shape::Cylinder {
                center,
                radius,
                half_height,
            } => {
                let side = 4.0 * PI * radius * half_height;
                let cap = PI * radius * radius;
                let pick = u() * (side + 2.0 * cap);
                let phi = 2.0 * PI * u();
                let (r, z) = if pick < side {
                    (radius, (2.0 * u() - 1.0) * half_height)
                } else {
                    let z = if pick < side + cap {
                        half_height
                    } else {
                        -half_height
                    };
                    (radius * sqrt(u()), z)
                };
                v3(center) + Vector3::new(r * cos(phi), r * sin(phi), z)
            }
            Shape::Plane {
                origin,
                edge_u,
                edge_v,
            } => v3(origin) + u() * v3(edge_u) + u() * v3(edge_v),
        }
    }

    /// Whether `p` lies inside the solid or within `eps` of it.
    pub fn contains(&self, p: &Vector3<f64>, eps: f64) -> bool {
        match *self {
            Shape::Box {
                center,
                half_extents: h,
                yaw,
            } => {
                let q = to_local(p - v3(center), yaw);
                (0..3).all(|k| fabs(q[k]) <= h[k] + eps)
            }
            Shape::Sphere { center, radius } => norm(&(p - v3(center))) <= radius + eps,
            Shape::Cylinder {
                center,
                radius,
                half_height,
            } => {
                let q = p - v3(center);
                sqrt(q.x * q.x + q.y * q.y) <= radius + eps && fabs(q.z) <= half_height + eps
            }
            Shape::Plane {
                origin,
                edge_u,
                edge_v,
            } => {
                let (eu, ev) = (v3(edge_u), v3(edge_v));
                let n = eu.cross(&ev);
                let n = n / norm(&n);
                let q = p - v3(origin);
                let s = q.dot(&eu) / eu.dot(&eu);
                let t = q.dot(&ev) / ev.dot(&ev);
                let (es, et) = (eps / norm(&eu), eps / norm(&ev));
                let d = q.dot(&n);
                s >= -es
                    && s <= 1.0 + es
                    && t >= -et
                    && t <= 1.0 + et
                    && d <= eps
                    && d >= -PLANE_SLAB - eps
            }
        }
    }

    /// Euclidean distance from `p` to the surface.
    pub fn surface_distance(&self, p: &Vector3<f64>) -> f64 {
        match *self {
            Shape::Box {
                center,
                half_extents: h,
                yaw,
            } => {
                let q = to_local(p - v3(center), yaw);
                let d = Vector3::new(fabs(q.x) - h[0], fabs(q.y) - h[1], fabs(q.z) - h[2]);
                if d.iter().all(|v| *v <= 0.0) {
                    -d.max()
                } else {
                    norm(&d.map(|v| v.max(0.0)))
                }
            }
            Shape::Sphere { center, radius } => fabs(norm(&(p - v3(center))) - radius),
            Shape::Cylinder {
                center,
                radius,
                half_height,
            } => {
                let q = p - v3(center);
                let dr = sqrt(q.x * q.x + q.y * q.y) - radius;
                let dz = fabs(q.z) - half_height;
                if dr <= 0.0 && dz <= 0.0 {
                    (-dr).min(-dz)
                } else {
                    {
                        let (a, b) = (dr.max(0.0), dz.max(0.0));
                        sqrt(a * a + b * b)
                    }
                }
            }
            Shape::Plane {
                origin,
                edge_u,
                edge_v,
            } => {
                let (eu, ev) = (v3(edge_u), v3(edge_v));
                let q = p - v3(origin);
                // Edges of a rectangle need not be orthogonal; solve the 2x2 system.
                let (a, b, c) = (eu.dot(&eu), eu.dot(&ev), ev.dot(&ev));
                let (x, y) = (q.dot(&eu), q.dot(&ev));
                let det = a * c - b * b;
                let s = ((c * x - b * y) / det).clamp(0.0, 1.0);
                let t = ((a * y - b * x) / det).clamp(0.0, 1.0);
                norm(&(q - s * eu - t * ev))
            }
        }
    }

    /// Nearest ray parameter `t > 0` at which `origin + t·dir` meets the
    /// surface.
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        match *self {
            Shape::Box {
                center,
                half_extents: h,
                yaw,
            } => {
                let o = to_local(origin - v3(center), yaw);
                let d = to_local(*dir, yaw);
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                for k in 0..3 {
                    if fabs(d[k]) < 1e-15 {
                        if fabs(o[k]) > h[k] {
                            return None;
                        }
                        continue;
                    }
                    let a = (-h[k] - o[k]) / d[k];
                    let b = (h[k] - o[k]) / d[k];
                    t0 = t0.max(a.min(b));
                    t1 = t1.min(a.max(b));
                }
                nearest_positive([t0, t1].into_iter().filter(|_| t0 <= t1))
            }
            Shape::Sphere { center, radius } => {
                let o = origin - v3(center);
                let a = dir.dot(dir);
                let b = 2.0 * o.dot(dir);
                let c = o.dot(&o) - radius * radius;
                nearest_positive(quadratic_roots(a, b, c))
            }
            Shape::Cylinder {
                center,
                radius,
                half_height,
            } => {
                let o = origin - v3(center);
                let a = dir.x * dir.x + dir.y * dir.y;
                let b = 2.0 * (o.x * dir.x + o.y * dir.y);
                let c = o.x * o.x + o.y * o.y - radius * radius;
                let side = if a > 1e-15 {
                    quadratic_roots(a, b, c)
                } else {
                    Vec::new()
                };
                let side = side
                    .into_iter()
                    .filter(|t| fabs(o.z + t * dir.z) <= half_height);
                let caps = [half_height, -half_height].into_iter().filter_map(|z| {
                    if fabs(dir.z) < 1e-15 {
                        return None;
                    }
                    let t = (z - o.z) / dir.z;
                    let (x, y) = (o.x + t * dir.x, o.y + t * dir.y);
                    (x * x + y * y <= radius * radius).then_some(t)
                });
                nearest_positive(side.chain(caps))
            }
            Shape::Plane {
                origin: po,
                edge_u,
                edge_v,
            } => {
                let (eu, ev) = (v3(edge_u), v3(edge_v));
                let n = eu.cross(&ev);
                let denom = dir.dot(&n);
                if fabs(denom) < 1e-15 {
                    return None;
                }
                let t = (v3(po) - origin).dot(&n) / denom;
                let q = origin + t * dir - v3(po);
                let (a, b, c) = (eu.dot(&eu), eu.dot(&ev), ev.dot(&ev));
                let (x, y) = (q.dot(&eu), q.dot(&ev));
                let det = a * c - b * b;
                let s = (c * x - b * y) / det;
                let w = (a * y - b * x) / det;
                let inside = (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&w);
                nearest_positive(inside.then_some(t))
            }
        }
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = sqrt(disc);
    // Numerically stable form.
    let q = -0.5 * (b + if b >= 0.0 { sq } else { -sq });
    let mut roots = Vec::with_capacity(2);
    if q != 0.0 {
        roots.push(c / q);
    }
    roots.push(q / a);
    roots
}

fn nearest_positive(ts: impl IntoIterator<Item = f64>) -> Option<f64> {
    ts.into_iter()
        .filter(|t| *t > T_MIN && t.is_finite())
        .fold(None, |best: Option<f64>, t| {
            Some(best.map_or(t, |b| b.min(t)))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shapes() -> [Shape; 4] {
        [
            Shape::Box {
                center: [0.5, -0.2, 0.3],
                half_extents: [0.3, 0.2, 0.3],
                yaw: 0.4,
            },
            Shape::Sphere {
                center: [0.0, 1.0, 0.5],
                radius: 0.5,
            },
            Shape::Cylinder {
                center: [-1.0, 0.0, 0.4],
                radius: 0.25,
                half_height: 0.4,
            },
            Shape::Plane {
                origin: [-2.0, -2.0, 0.0],
                edge_u: [4.0, 0.0, 0.0],
                edge_v: [0.0, 4.0, 0.0],
            },
        ]
    }

    #[test]
    fn areas() {
        let unit = Shape::Box {
            center: [0.0; 3],
            half_extents: [0.5; 3],
            yaw: 1.0,
        };
        assert!((unit.area() - 6.0).abs() < 1e-12);
        assert!((shapes()[3].area() - 16.0).abs() < 1e-12);
        let flat = Shape::Sphere {
            center: [0.0; 3],
            radius: 0.0,
        };
        assert!(flat.is_degenerate());
        assert!(!unit.is_degenerate());
    }

    #[test]
    fn samples_lie_on_surface_and_inside_solid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in shapes() {
            for _ in 0..2000 {
                let p = s.sample_point(&mut rng);
                assert!(s.surface_distance(&p) < 1e-12, "{s:?} {p:?}");
                assert!(s.contains(&p, 1e-9));
            }
        }
    }

    #[test]
    fn rays_toward_samples_hit_them() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eye = Vector3::new(0.3, -3.0, 2.5);
        for s in shapes() {
            for _ in 0..500 {
                let p = s.sample_point(&mut rng);
                let t = s.intersect(&eye, &(p - eye)).expect("ray must hit");
                // the first hit is at or before the sample itself
                assert!(t <= 1.0 + 1e-9);
                let q = eye + t * (p - eye);
                assert!(s.surface_distance(&q) < 1e-9);
            }
        }
    }

    #[test]
    fn wall_at_two_meters() {
        let wall = Shape::Plane {
            origin: [-5.0, 2.0, -5.0],
            edge_u: [10.0, 0.0, 0.0],
            edge_v: [0.0, 0.0, 10.0],
        };
        let t = wall.intersect(&Vector3::zeros(), &Vector3::new(0.0, 1.0, 0.0));
        assert_eq!(t, Some(2.0));
    }

    #[test]
    fn misses() {
        let up = Vector3::new(0.0, 0.0, 1.0);
        let far = Vector3::new(10.0, 10.0, 0.0);
        for s in shapes() {
            assert_eq!(s.intersect(&far, &up), None, "{s:?}");
        }
    }

    #[test]
    fn plane_slab_lies_behind() {
        let floor = shapes()[3];
        assert!(floor.contains(&Vector3::new(0.0, 0.0, -0.01), 1e-3));
        assert!(floor.contains(&Vector3::new(0.0, 0.0, 0.0005), 1e-3));
        assert!(!floor.contains(&Vector3::new(0.0, 0.0, 0.01), 1e-3));
        assert!(floor.contains(&Vector3::new(0.0, 0.0, -0.2), 1e-3));
        assert!(!floor.contains(&Vector3::new(0.0, 0.0, -0.6), 1e-3));
    }
}
