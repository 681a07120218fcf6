//! Multiplane images and the estimators that produce them from plane-sweep volumes.

use rayon::prelude::*;

use crate::compositing::over_premultiplied;
use crate::error::{Error, Result};
use crate::psv::Psv;
use crate::raster::Image;

/// Per-view stack of fronto-parallel RGBα planes, layer 0 farthest.
///
/// Colors are straight (not premultiplied).
#[derive(Clone, Debug, PartialEq)]
pub struct Mpi {
    pub view: usize,
    pub width: usize,
    pub height: usize,
    /// Inverse depth of each plane, strictly increasing (back to front).
    pub disparities: Vec<f64>,
    /// `[layer][y][x][rgb]`
    pub color: Vec<f32>,
    /// `[layer][y][x]`
    pub alpha: Vec<f32>,
}

impl Mpi {
    pub fn new(view: usize, width: usize, height: usize, disparities: Vec<f64>) -> Self {
        let n = disparities.len() * width * height;
        Mpi {
            view,
            width,
            height,
            disparities,
            color: vec![0.0; 3 * n],
            alpha: vec![0.0; n],
        }
    }

    pub fn layer_count(&self) -> usize {
        self.disparities.len()
    }

    #[inline]
    pub fn index(&self, layer: usize, x: usize, y: usize) -> usize {
        (layer * self.height + y) * self.width + x
    }

    #[inline]
    pub fn rgba(&self, layer: usize, x: usize, y: usize) -> ([f32; 3], f32) {
        let i = self.index(layer, x, y);
        (
            [self.color[3 * i], self.color[3 * i + 1], self.color[3 * i + 2]],
            self.alpha[i],
        )
    }

    /// Back-to-front over composite seen from the MPI's own camera, over black.
    pub fn composite(&self) -> Image {
        let mut out = Image::new(self.width, self.height, 4);
        for y in 0..self.height {
            for x in 0..self.width {
                let mut acc = [0.0f64; 4];
                for l in 0..self.layer_count() {
                    let (c, a) = self.rgba(l, x, y);
                    let a = a as f64;
                    over_premultiplied(
                        &mut acc,
                        [c[0] as f64 * a, c[1] as f64 * a, c[2] as f64 * a, a],
                    );
                }
                out.pixel_mut(x, y).copy_from_slice(&acc);
            }
        }
        out
    }
}

/// Turns a plane-sweep volume into an MPI. Learned predictors plug in here.
pub trait MpiEstimator: Send + Sync {
    fn estimate(&self, psv: &Psv) -> Result<Mpi>;
}

pub const DEFAULT_SIGMA0: f64 = 0.05;
pub const DEFAULT_ALPHA_MIN: f64 = 0.999;

/// Non-learned estimator scoring each plane by the color variance of the
/// reference and warped neighbor samples.
///
/// Per pixel, planes with at least one valid neighbor sample compete in a
/// softmax over `-σ²/σ₀²`; the softmax weights are scaled by the smallest
/// factor `s >= 1` for which the stack's total opacity reaches `alpha_min`.
/// Each plane's color is the sample mean. Pixels with no valid neighbor sample
/// at any plane stay transparent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhotoConsistencyEstimator {
    pub sigma0: f64,
    pub alpha_min: f64,
    /// Radius of the box window over which variances are averaged; 0 disables it.
    pub window_radius: usize,
}

impl Default for PhotoConsistencyEstimator {
    fn default() -> Self {
        PhotoConsistencyEstimator {
            sigma0: DEFAULT_SIGMA0,
            alpha_min: DEFAULT_ALPHA_MIN,
            window_radius: 0,
        }
    }
}

impl PhotoConsistencyEstimator {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma0 must be positive, got {}", self.sigma0)));
        }
        if !(0.0..1.0).contains(&self.alpha_min) {
            return Err(Error::InvalidArgument(format!(
                "alpha_min must lie in [0, 1), got {}",
                self.alpha_min
            )));
        }
        Ok(())
    }
}

/// Mean and variance of one plane's samples at one pixel.
struct PlaneStats {
    mean: [f64; 3],
    variance: f64,
    candidate: bool,
}

fn plane_stats(psv: &Psv, layer: usize, x: usize, y: usize) -> PlaneStats {
    let mut samples: [[f64; 3]; 16] = [[0.0; 3]; 16];
    let r = psv.reference.pixel(x, y);
    samples[0] = [r[0], r[1], r[2]];
    let mut n = 1;
    for slot in 0..psv.neighbor_count() {
        if let Some(s) = psv.sample(layer, x, y, slot) {
            if n == samples.len() {
                break;
            }
            samples[n] = [s[0] as f64, s[1] as f64, s[2] as f64];
            n += 1;
        }
    }
    let samples = &mut samples[..n];
    // fixed summation order regardless of neighbor order
    samples.sort_by(|a, b| {
        a[0].total_cmp(&b[0])
            .then(a[1].total_cmp(&b[1]))
            .then(a[2].total_cmp(&b[2]))
    });
    let mut mean = [0.0; 3];
    for s in samples.iter() {
        for c in 0..3 {
            mean[c] += s[c];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = 0.0;
    for s in samples.iter() {
        for c in 0..3 {
            var += (s[c] - mean[c]).powi(2);
        }
    }
    PlaneStats {
        mean,
        variance: var / (3 * n) as f64,
        candidate: n > 1,
    }
}

/// Smallest scale `s >= 1` with `1 - Π(1 - min(1, s p_l)) >= alpha_min`, applied to `p`.
fn floor_total_opacity(p: &mut [f64], alpha_min: f64) {
    let total = |s: f64, p: &[f64]| 1.0 - p.iter().map(|&v| 1.0 - (s * v).min(1.0)).product::<f64>();
    if total(1.0, p) >= alpha_min {
        return;
    }
    let pmax = p.iter().cloned().fold(0.0, f64::max);
    if pmax <= 0.0 {
        return;
    }
    let (mut lo, mut hi) = (1.0, 1.0 / pmax);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if total(mid, p) >= alpha_min {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    for v in p.iter_mut() {
        *v = (hi * *v).min(1.0);
    }
}

impl MpiEstimator for PhotoConsistencyEstimator {
    fn estimate(&self, psv: &Psv) -> Result<Mpi> {
        self.validate()?;
        let (w, h, layers) = (psv.width, psv.height, psv.layer_count());
        let plane_size = w * h;

        // per-plane statistics, parallel over planes
        let stats: Vec<(Vec<f64>, Vec<f64>, Vec<bool>)> = (0..layers)
            .into_par_iter()
            .map(|l| {
                let mut mean = vec![0.0; 3 * plane_size];
                let mut var = vec![0.0; plane_size];
                let mut cand = vec![false; plane_size];
                for y in 0..h {
                    for x in 0..w {
                        let s = plane_stats(psv, l, x, y);
                        let i = y * w + x;
                        mean[3 * i..3 * i + 3].copy_from_slice(&s.mean);
                        var[i] = s.variance;
                        cand[i] = s.candidate;
                    }
                }
                if self.window_radius > 0 {
                    var = box_average(&var, &cand, w, h, self.window_radius);
                }
                (mean, var, cand)
            })
            .collect();

        let mut mpi = Mpi::new(psv.ref_view, w, h, psv.disparities.clone());
        let inv_s2 = 1.0 / (self.sigma0 * self.sigma0);
        let rows: Vec<(Vec<f32>, Vec<f32>)> = (0..h)
            .into_par_iter()
            .map(|y| {
                let mut colors = vec![0f32; layers * w * 3];
                let mut alphas = vec![0f32; layers * w];
                let mut p = vec![0.0; layers];
                for x in 0..w {
                    let i = y * w + x;
                    let mut best = f64::NEG_INFINITY;
                    for (_, var, cand) in &stats {
                        if cand[i] {
                            best = best.max(-var[i] * inv_s2);
                        }
                    }
                    for (l, (mean, _, _)) in stats.iter().enumerate() {
                        for c in 0..3 {
                            colors[(l * w + x) * 3 + c] = mean[3 * i + c].clamp(0.0, 1.0) as f32;
                        }
                    }
                    if best == f64::NEG_INFINITY {
                        continue;
                    }
                    let mut sum = 0.0;
                    for (l, (_, var, cand)) in stats.iter().enumerate() {
                        p[l] = if cand[i] {
                            (-var[i] * inv_s2 - best).exp()
                        } else {
                            0.0
                        };
                        sum += p[l];
                    }
                    for v in p.iter_mut() {
                        *v /= sum;
                    }
                    floor_total_opacity(&mut p, self.alpha_min);
                    for l in 0..layers {
                        alphas[l * w + x] = p[l].clamp(0.0, 1.0) as f32;
                    }
                }
                (colors, alphas)
            })
            .collect();

        for (y, (colors, alphas)) in rows.into_iter().enumerate() {
            for l in 0..layers {
                let dst = mpi.index(l, 0, y);
                mpi.alpha[dst..dst + w].copy_from_slice(&alphas[l * w..(l + 1) * w]);
                mpi.color[3 * dst..3 * (dst + w)].copy_from_slice(&colors[l * w * 3..(l + 1) * w * 3]);
            }
        }
        Ok(mpi)
    }
}

/// Box-window mean of `values` over candidate pixels; non-candidates keep their value.
fn box_average(values: &[f64], cand: &[bool], w: usize, h: usize, r: usize) -> Vec<f64> {
    let mut out = values.to_vec();
    for y in 0..h {
        for x in 0..w {
            if !cand[y * w + x] {
                continue;
            }
            let (mut sum, mut n) = (0.0, 0usize);
            for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    if cand[yy * w + xx] {
                        sum += values[yy * w + xx];
                        n += 1;
                    }
                }
            }
            out[y * w + x] = sum / n as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraRig;
    use crate::psv::build_psv;

    fn constant_views(k: usize, value: f64) -> (CameraRig, Vec<Image>) {
        let rig = CameraRig::ring(k, 0.1, 100.0, 12, 10).unwrap();
        let images = (0..k).map(|_| Image::from_fn(12, 10, 3, |_, _, _| value)).collect();
        (rig, images)
    }

    #[test]
    fn constant_scene_gives_uniform_alpha() {
        let (rig, images) = constant_views(8, 0.4);
        let psv = build_psv(&rig, &images, 0, 1.0, 20.0, 8, 2).unwrap();
        let mpi = PhotoConsistencyEstimator::default().estimate(&psv).unwrap();
        let comp = mpi.composite();
        // center pixel sees both neighbors at every depth
        let (x, y) = (6, 5);
        let a0 = mpi.rgba(0, x, y).1;
        for l in 0..8 {
            let (c, a) = mpi.rgba(l, x, y);
            assert!((a - a0).abs() < 1e-6, "alpha not uniform: {a} vs {a0}");
            assert!((c[0] - 0.4).abs() < 1e-6);
        }
        let total = comp.pixel(x, y)[3];
        assert!(total >= 0.999 - 1e-9);
        assert!((comp.pixel(x, y)[0] - 0.4).abs() < 1e-3);
    }

    #[test]
    fn no_valid_neighbor_means_transparent() {
        let (rig, images) = constant_views(4, 0.5);
        let mut psv = build_psv(&rig, &images, 0, 1.0, 20.0, 4, 1).unwrap();
        psv.validity.iter_mut().for_each(|v| *v = false);
        let mpi = PhotoConsistencyEstimator::default().estimate(&psv).unwrap();
        assert!(mpi.alpha.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn opacity_floor_is_minimal() {
        let mut p = vec![0.25; 4];
        floor_total_opacity(&mut p, 0.999);
        let total = 1.0 - p.iter().map(|v| 1.0 - v).product::<f64>();
        assert!(total >= 0.999 && total < 0.999 + 1e-9);
        assert!(p.windows(2).all(|w| w[0] == w[1]));
        let mut hard = vec![0.0, 1.0, 0.0];
        floor_total_opacity(&mut hard, 0.999);
        assert_eq!(hard, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn estimate_is_invariant_to_neighbor_order() {
        let rig = CameraRig::ring(8, 0.1, 100.0, 12, 10).unwrap();
        let images: Vec<_> = (0..8)
            .map(|v| Image::from_fn(12, 10, 3, |x, y, c| ((x * 5 + y * 3 + c + v * 7) % 13) as f64 / 12.0))
            .collect();
        let a = crate::psv::build_psv_with_neighbors(&rig, &images, 0, &[1, 7, 2], 1.0, 10.0, 6).unwrap();
        let b = crate::psv::build_psv_with_neighbors(&rig, &images, 0, &[2, 1, 7], 1.0, 10.0, 6).unwrap();
        let est = PhotoConsistencyEstimator::default();
        assert_eq!(est.estimate(&a).unwrap(), est.estimate(&b).unwrap());
    }
}
