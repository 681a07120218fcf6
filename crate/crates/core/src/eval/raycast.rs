//! Exact ray-cast ground truth: one ray per pixel center, nearest hit wins.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::scene::{Primitive, SyntheticScene};
use crate::geometry::{CameraRig, Extrinsics};
use crate::raster::Image;
use crate::render::{TargetCamera, TargetMode};

const T_MIN: f64 = 1e-9;
const MAX_BOUNCES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vector3<f64>,
    pub primitive: usize,
}

/// Ground truth color and depth. Depth is camera-frame `z` for perspective
/// targets and cylindrical radius for panoramas; `inf` where nothing is hit.
#[derive(Clone, Debug, PartialEq)]
pub struct RaycastImage {
    pub color: Image,
    pub depth: Vec<f64>,
}

fn solve_quadratic(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 || a == 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // numerically stable root pair
    let q = -0.5 * (b + b.signum() * sq);
    let (r0, r1) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Some((r0.min(r1), r0.max(r1)))
}

fn intersect(p: &Primitive, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
    match *p {
        Primitive::Cylinder {
            center,
            radius,
            z_min,
            z_max,
            ..
        } => {
            let (ox, oy) = (o.x - center[0], o.y - center[1]);
            let a = d.x * d.x + d.y * d.y;
            let b = 2.0 * (ox * d.x + oy * d.y);
            let c = ox * ox + oy * oy - radius * radius;
            let (t0, t1) = solve_quadratic(a, b, c)?;
            [t0, t1].into_iter().find(|&t| {
                let z = o.z + t * d.z;
                t > T_MIN && z >= z_min && z <= z_max
            })
        }
        Primitive::Sphere { center, radius, .. } => {
            let oc = o - Vector3::from(center);
            let (t0, t1) = solve_quadratic(d.dot(d), 2.0 * oc.dot(d), oc.dot(&oc) - radius * radius)?;
            [t0, t1].into_iter().find(|&t| t > T_MIN)
        }
        Primitive::Box { min, max, .. } => {
            let mut t_near = f64::NEG_INFINITY;
            let mut t_far = f64::INFINITY;
            for k in 0..3 {
                if d[k] == 0.0 {
                    if o[k] < min[k] || o[k] > max[k] {
                        return None;
                    }
                    continue;
                }
                let a = (min[k] - o[k]) / d[k];
                let b = (max[k] - o[k]) / d[k];
                t_near = t_near.max(a.min(b));
                t_far = t_far.min(a.max(b));
            }
            if t_near > t_far {
                return None;
            }
            [t_near, t_far].into_iter().find(|&t| t > T_MIN)
        }
        Primitive::Mirror {
            center,
            u,
            v,
            half_u,
            half_v,
            ..
        } => {
            let (u, v) = (Vector3::from(u), Vector3::from(v));
            let n = u.cross(&v);
            let denom = n.dot(d);
            if denom.abs() < 1e-15 {
                return None;
            }
            let t = n.dot(&(Vector3::from(center) - o)) / denom;
            let rel = o + t * d - Vector3::from(center);
            (t > T_MIN && rel.dot(&u).abs() <= half_u && rel.dot(&v).abs() <= half_v).then_some(t)
        }
    }
}

/// Nearest intersection along `o + t d`, `t > 0`.
pub fn trace(scene: &SyntheticScene, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (i, p) in scene.primitives.iter().enumerate() {
        if let Some(t) = intersect(p, o, d) {
            if best.is_none_or(|b| t < b.t) {
                best = Some(Hit {
                    t,
                    point: o + t * d,
                    primitive: i,
                });
            }
        }
    }
    best
}

fn surface_color(p: &Primitive, x: &Vector3<f64>) -> [f64; 3] {
    match *p {
        Primitive::Cylinder {
            center, radius, material, ..
        } => {
            let phi = (x.y - center[1]).atan2(x.x - center[0]);
            material.shade(phi * radius, x.z)
        }
        Primitive::Sphere { center, radius, material } => {
            let r = x - Vector3::from(center);
            let lon = r.y.atan2(r.x);
            let lat = (r.z / radius).clamp(-1.0, 1.0).asin();
            material.shade(lon * radius, lat * radius)
        }
        Primitive::Box { min, max, material } => {
            // face axis is the one the point lies closest to a slab boundary on
            let mut axis = 0;
            let mut best = f64::INFINITY;
            for k in 0..3 {
                let e = (x[k] - min[k]).abs().min((x[k] - max[k]).abs());
                if e < best {
                    best = e;
                    axis = k;
                }
            }
            let (a, b) = match axis {
                0 => (x.y, x.z),
                1 => (x.x, x.z),
                _ => (x.x, x.y),
            };
            material.shade(a, b)
        }
        Primitive::Mirror { .. } => [0.0; 3],
    }
}

/// Radiance along a ray, following mirror bounces.
pub fn shade_ray(scene: &SyntheticScene, o: &Vector3<f64>, d: &Vector3<f64>) -> ([f64; 3], Option<Hit>) {
    let first = trace(scene, o, d);
    let mut tint = [1.0; 3];
    let mut hit = first;
    let mut dir = *d;
    for _ in 0..=MAX_BOUNCES {
        let Some(h) = hit else {
            return (mul(tint, scene.background), first);
        };
        let prim = &scene.primitives[h.primitive];
        match *prim {
            Primitive::Mirror { u, v, reflectance, .. } => {
                let n = Vector3::from(u).cross(&Vector3::from(v));
                dir -= 2.0 * dir.dot(&n) * n;
                tint = mul(tint, reflectance);
                hit = trace(scene, &h.point, &dir);
            }
            _ => return (mul(tint, surface_color(prim, &h.point)), first),
        }
    }
    ([0.0; 3], first)
}

fn mul(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] * b[0], a[1] * b[1], a[2] * b[2]]
}

/// Renders `scene` (given in the frame `target.pose` maps from).
pub fn raycast_render(scene: &SyntheticScene, target: &TargetCamera) -> RaycastImage {
    let (w, h) = target.size();
    let origin = target.pose.center();
    let to_world = target.pose.rotation.transpose();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut color = Vec::with_capacity(3 * w);
            let mut depth = Vec::with_capacity(w);
            for x in 0..w {
                let local = match &target.mode {
                    TargetMode::Perspective(k) => k.ray(x as f64, y as f64),
                    TargetMode::Panorama(m) => {
                        let (phi, slope) = m.pixel_center(x, y);
                        Vector3::new(phi.cos(), phi.sin(), slope)
                    }
                };
                let dir = to_world * local;
                let (c, hit) = shade_ray(scene, &origin, &dir);
                color.extend_from_slice(&c);
                // with these unnormalized rays, t is exactly z (perspective) or rho (panorama)
                depth.push(hit.map_or(f64::INFINITY, |h| h.t));
            }
            (color, depth)
        })
        .collect();
    let mut color = Image::new(w, h, 3);
    let mut depth = Vec::with_capacity(w * h);
    for (y, (c, d)) in rows.into_iter().enumerate() {
        color.data[3 * w * y..3 * w * (y + 1)].copy_from_slice(&c);
        depth.extend(d);
    }
    RaycastImage { color, depth }
}

/// Ground-truth input images for every rig camera.
pub fn render_rig_views(scene: &SyntheticScene, rig: &CameraRig) -> Vec<Image> {
    rig.cameras
        .iter()
        .map(|cam| raycast_render(scene, &TargetCamera::perspective(cam.intrinsics, cam.extrinsics)).color)
        .collect()
}

/// World-frame target for a pose given in the rig frame.
pub fn world_target(target: &TargetCamera, rig_center: &Extrinsics) -> TargetCamera {
    TargetCamera {
        mode: target.mode,
        pose: target.pose.compose(rig_center),
    }
}
