//! Bilinear forward splatting of one layer with per-pixel soft z-buffering.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::{LayerView, SoftZConfig, TargetCamera, TargetMode};
use crate::geometry::{from_cylindrical, to_cylindrical, CylCoord, PanoMapping};

/// Rows per work band; a point's footprint spans at most two bands.
const BAND_ROWS: usize = 8;

/// Continuous splat position (pixel centers on integers) and inverse depth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub inv_depth: f64,
}

impl TargetCamera {
    /// Projects a rig-frame point; `None` behind the camera or on the axis.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Option<Projection> {
        let x = self.pose.apply(p);
        match &self.mode {
            TargetMode::Perspective(k) => {
                if !(x.z > 1e-6) {
                    return None;
                }
                let (u, v) = k.project(&x);
                Some(Projection {
                    u,
                    v,
                    inv_depth: 1.0 / x.z,
                })
            }
            TargetMode::Panorama(m) => {
                let c = to_cylindrical(&x);
                if !(c.rho > 1e-9) {
                    return None;
                }
                Some(Projection {
                    u: m.column_of(c.phi) - 0.5,
                    v: m.row_of(c.z / c.rho) - 0.5,
                    inv_depth: 1.0 / c.rho,
                })
            }
        }
    }

    /// Projection plus the Jacobian of `(u, v, inv_depth)` with respect to the rig-frame point.
    pub fn project_with_jacobian(&self, p: &Vector3<f64>) -> Option<(Projection, Matrix3<f64>)> {
        let proj = self.project(p)?;
        let x = self.pose.apply(p);
        let local = match &self.mode {
            TargetMode::Perspective(k) => {
                let iz = 1.0 / x.z;
                Matrix3::new(
                    k.fx * iz,
                    0.0,
                    -k.fx * x.x * iz * iz,
                    0.0,
                    k.fy * iz,
                    -k.fy * x.y * iz * iz,
                    0.0,
                    0.0,
                    -iz * iz,
                )
            }
            TargetMode::Panorama(m) => {
                let r2 = x.x * x.x + x.y * x.y;
                let r = r2.sqrt();
                let r3 = r2 * r;
                let du = m.width as f64 / (2.0 * std::f64::consts::PI);
                let dv = -(m.height as f64) / (2.0 * m.v_fov_slope);
                Matrix3::new(
                    -du * x.y / r2,
                    du * x.x / r2,
                    0.0,
                    -dv * x.z * x.x / r3,
                    -dv * x.z * x.y / r3,
                    dv / r,
                    -x.x / r3,
                    -x.y / r3,
                    0.0,
                )
            }
        };
        Some((proj, local * self.pose.rotation))
    }
}

/// The four target pixels of a bilinear footprint and their weights, in the
/// order (x0,y0), (x0+1,y0), (x0,y0+1), (x0+1,y0+1). Pixels outside the image
/// are `None`; panorama columns wrap.
#[derive(Clone, Copy, Debug)]
pub struct Footprint {
    pub pixels: [Option<usize>; 4],
    pub weights: [f64; 4],
    /// `d weight / du` and `d weight / dv` per corner.
    pub dw_du: [f64; 4],
    pub dw_dv: [f64; 4],
}

#[inline]
pub fn footprint(target: &TargetCamera, u: f64, v: f64) -> Footprint {
    let (w, h) = target.size();
    let wraps = matches!(target.mode, TargetMode::Panorama(_));
    let x0 = u.floor();
    let y0 = v.floor();
    let fx = u - x0;
    let fy = v - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let mut pixels = [None; 4];
    for (k, (dx, dy)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
        let (mut x, y) = (x0 + dx, y0 + dy);
        if y < 0 || y >= h as i64 {
            continue;
        }
        if wraps {
            x = x.rem_euclid(w as i64);
        } else if x < 0 || x >= w as i64 {
            continue;
        }
        pixels[k] = Some(y as usize * w + x as usize);
    }
    Footprint {
        pixels,
        weights: [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy],
        dw_du: [-(1.0 - fy), 1.0 - fy, -fy, fy],
        dw_dv: [-(1.0 - fx), -fx, 1.0 - fx, fx],
    }
}

/// A splatted MDP pixel.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SplatRecord {
    pub source: usize,
    pub color: [f64; 3],
    pub alpha: f64,
    pub inv_depth: f64,
    pub footprint: Footprint,
}

/// World position of an MDP pixel at its stored radius.
#[inline]
pub fn mdp_pixel_point(mapping: &PanoMapping, px: usize, radius: f64) -> Vector3<f64> {
    let (phi, h) = mapping.pixel_center(px % mapping.width, px / mapping.width);
    from_cylindrical(&CylCoord {
        rho: radius,
        phi,
        z: radius * h,
    })
}

pub(crate) fn splat_records(
    layer: &LayerView<'_>,
    mapping: &PanoMapping,
    target: &TargetCamera,
) -> Vec<SplatRecord> {
    let w = mapping.width;
    (0..mapping.height)
        .into_par_iter()
        .flat_map_iter(|row| {
            (row * w..(row + 1) * w).filter_map(move |px| {
                let alpha = layer.alpha[px] as f64;
                if !(alpha > 0.0) {
                    return None;
                }
                let p = mdp_pixel_point(mapping, px, layer.depth[px] as f64);
                let proj = target.project(&p)?;
                let footprint = footprint(target, proj.u, proj.v);
                if footprint.pixels.iter().all(Option::is_none) {
                    return None;
                }
                Some(SplatRecord {
                    source: px,
                    color: [
                        layer.color[3 * px] as f64,
                        layer.color[3 * px + 1] as f64,
                        layer.color[3 * px + 2] as f64,
                    ],
                    alpha,
                    inv_depth: proj.inv_depth,
                    footprint,
                })
            })
        })
        .collect()
}

/// Per-pixel soft z-buffer sums of one layer.
#[derive(Clone, Debug)]
pub struct LayerAccum {
    pub width: usize,
    pub height: usize,
    /// Running maximum inverse depth among positive-weight contributions.
    pub d_max: Vec<f64>,
    /// `Σ w e` per pixel.
    pub weight: Vec<f64>,
    /// `Σ w e C` per pixel, interleaved RGB.
    pub color: Vec<f64>,
    /// `Σ w e α` per pixel.
    pub alpha: Vec<f64>,
}

impl LayerAccum {
    /// Resolved straight color and opacity at a pixel.
    #[inline]
    pub fn resolved(&self, px: usize, zcfg: &SoftZConfig) -> ([f64; 3], f64) {
        let den = self.weight[px].max(zcfg.epsilon);
        if self.weight[px] <= 0.0 {
            return ([0.0; 3], 0.0);
        }
        (
            [
                self.color[3 * px] / den,
                self.color[3 * px + 1] / den,
                self.color[3 * px + 2] / den,
            ],
            self.alpha[px] / den,
        )
    }
}

/// Accumulates records band by band; within a pixel, contributions are summed
/// in record order so the result is independent of the worker count.
pub(crate) fn accumulate(records: &[SplatRecord], target: &TargetCamera, zcfg: &SoftZConfig) -> LayerAccum {
    let (w, h) = target.size();
    let bands = h.div_ceil(BAND_ROWS);
    let mut per_band: Vec<Vec<usize>> = vec![Vec::new(); bands];
    for (i, r) in records.iter().enumerate() {
        let mut last = usize::MAX;
        for px in r.footprint.pixels.iter().flatten() {
            let b = px / w / BAND_ROWS;
            if b != last {
                per_band[b].push(i);
                last = b;
            }
        }
    }
    let band_sums: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = per_band
        .par_iter()
        .enumerate()
        .map(|(b, idx)| {
            let row0 = b * BAND_ROWS;
            let rows = BAND_ROWS.min(h - row0);
            let base = row0 * w;
            let n = rows * w;
            let mut d_max = vec![f64::NEG_INFINITY; n];
            let local = |px: usize| (px >= base && px < base + n).then(|| px - base);
            for &i in idx {
                let r = &records[i];
                for (k, px) in r.footprint.pixels.iter().enumerate() {
                    if let Some(q) = px.and_then(local) {
                        if r.footprint.weights[k] > 0.0 && r.inv_depth > d_max[q] {
                            d_max[q] = r.inv_depth;
                        }
                    }
                }
            }
            let mut weight = vec![0.0; n];
            let mut color = vec![0.0; 3 * n];
            let mut alpha = vec![0.0; n];
            for &i in idx {
                let r = &records[i];
                for (k, px) in r.footprint.pixels.iter().enumerate() {
                    let wk = r.footprint.weights[k];
                    if !(wk > 0.0) {
                        continue;
                    }
                    if let Some(q) = px.and_then(local) {
                        let we = wk * ((r.inv_depth - d_max[q]) * zcfg.tau).exp();
                        weight[q] += we;
                        for c in 0..3 {
                            color[3 * q + c] += we * r.color[c];
                        }
                        alpha[q] += we * r.alpha;
                    }
                }
            }
            (d_max, weight, color, alpha)
        })
        .collect();

    let mut acc = LayerAccum {
        width: w,
        height: h,
        d_max: Vec::with_capacity(w * h),
        weight: Vec::with_capacity(w * h),
        color: Vec::with_capacity(3 * w * h),
        alpha: Vec::with_capacity(w * h),
    };
    for (d, wt, c, a) in band_sums {
        acc.d_max.extend(d);
        acc.weight.extend(wt);
        acc.color.extend(c);
        acc.alpha.extend(a);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Extrinsics, Intrinsics};
    use proptest::prelude::*;

    fn persp() -> TargetCamera {
        TargetCamera::perspective(Intrinsics::from_hfov(90.0, 10, 10).unwrap(), Extrinsics::identity())
    }

    proptest! {
        #[test]
        fn bilinear_weights_partition_unity(u in -100.0..100.0f64, v in -100.0..100.0f64) {
            let f = footprint(&persp(), u, v);
            let s: f64 = f.weights.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-7);
            prop_assert!(f.weights.iter().all(|&w| w >= 0.0));
            let du: f64 = f.dw_du.iter().sum();
            let dv: f64 = f.dw_dv.iter().sum();
            prop_assert!(du.abs() < 1e-12 && dv.abs() < 1e-12);
        }
    }

    #[test]
    fn panorama_footprint_wraps_seam() {
        let t = TargetCamera::panorama(PanoMapping::new(16, 8, 1.0).unwrap(), Extrinsics::identity());
        let f = footprint(&t, 15.5, 3.0);
        assert_eq!(f.pixels[0], Some(3 * 16 + 15));
        assert_eq!(f.pixels[1], Some(3 * 16));
        let f = footprint(&t, -0.25, 7.5);
        assert_eq!(f.pixels[0], Some(7 * 16 + 15));
        assert_eq!(f.pixels[1], Some(7 * 16));
        assert_eq!(f.pixels[2], None);
    }

    #[test]
    fn perspective_footprint_clips() {
        let f = footprint(&persp(), -0.5, 9.5);
        assert_eq!(f.pixels, [None, Some(90), None, None]);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let targets = [
            TargetCamera::perspective(
                Intrinsics::new(30.0, 28.0, 7.5, 6.0, 16, 12).unwrap(),
                Extrinsics::new(
                    nalgebra::Rotation3::from_euler_angles(0.1, -0.2, 0.3).into_inner(),
                    Vector3::new(0.05, -0.02, 0.1),
                )
                .unwrap(),
            ),
            TargetCamera::panorama(
                PanoMapping::new(64, 16, 1.0).unwrap(),
                Extrinsics::new(
                    nalgebra::Rotation3::from_euler_angles(0.05, 0.02, -0.4).into_inner(),
                    Vector3::new(0.1, 0.2, -0.05),
                )
                .unwrap(),
            ),
        ];
        let p = Vector3::new(0.4, -0.3, 2.5);
        for t in &targets {
            let (_, j) = t.project_with_jacobian(&p).unwrap();
            for axis in 0..3 {
                let mut e = Vector3::zeros();
                e[axis] = 1e-6;
                let a = t.project(&(p + e)).unwrap();
                let b = t.project(&(p - e)).unwrap();
                let fd = [(a.u - b.u) / 2e-6, (a.v - b.v) / 2e-6, (a.inv_depth - b.inv_depth) / 2e-6];
                for row in 0..3 {
                    assert!((j[(row, axis)] - fd[row]).abs() < 1e-5 * (1.0 + fd[row].abs()));
                }
            }
        }
    }
}
