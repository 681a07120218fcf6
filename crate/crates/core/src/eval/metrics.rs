//! PSNR, SSIM and L1 over the RGB channels of linear images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Image;

/// Reported in place of +inf for identical images.
pub const PSNR_CAP: f64 = 99.0;

const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub psnr: f64,
    pub ssim: f64,
    pub l1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frames: Vec<Metrics>,
    /// Per-metric mean over frames.
    pub mean: Metrics,
}

impl MetricsReport {
    pub fn from_frames(frames: Vec<Metrics>) -> Self {
        let n = frames.len().max(1) as f64;
        let sum = |f: fn(&Metrics) -> f64| frames.iter().map(f).sum::<f64>() / n;
        let mean = Metrics {
            psnr: sum(|m| m.psnr),
            ssim: sum(|m| m.ssim),
            l1: sum(|m| m.l1),
        };
        MetricsReport { frames, mean }
    }
}

fn check(a: &Image, b: &Image) -> Result<()> {
    if a.width != b.width || a.height != b.height || a.channels < 3 || b.channels < 3 {
        return Err(Error::DimensionMismatch(format!(
            "cannot compare {}x{}x{} with {}x{}x{}",
            a.width, a.height, a.channels, b.width, b.height, b.channels
        )));
    }
    Ok(())
}

fn rgb_pairs<'a>(a: &'a Image, b: &'a Image) -> impl Iterator<Item = (f64, f64)> + 'a {
    (0..a.width * a.height).flat_map(move |p| (0..3).map(move |c| (a.data[p * a.channels + c], b.data[p * b.channels + c])))
}

pub fn l1(a: &Image, b: &Image) -> Result<f64> {
    check(a, b)?;
    let n = (3 * a.width * a.height) as f64;
    Ok(rgb_pairs(a, b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n)
}

pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    check(a, b)?;
    let n = (3 * a.width * a.height) as f64;
    let mse = rgb_pairs(a, b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
    Ok(if mse > 0.0 {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    } else {
        PSNR_CAP
    })
}

fn gaussian_kernel() -> [f64; 2 * SSIM_RADIUS + 1] {
    let mut k = [0.0; 2 * SSIM_RADIUS + 1];
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - SSIM_RADIUS as f64;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable Gaussian filter keeping only fully covered ("valid") positions.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let r = k.len() / 2;
    let (ow, oh) = (w - 2 * r, h - 2 * r);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().enumerate().map(|(i, kv)| kv * src[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k.iter().enumerate().map(|(i, kv)| kv * tmp[(y + i) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean SSIM (11x11 Gaussian window, sigma 1.5, data range 1) averaged over
/// RGB channels, valid region only.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check(a, b)?;
    let win = 2 * SSIM_RADIUS + 1;
    if a.width < win || a.height < win {
        return Err(Error::DimensionMismatch(format!("SSIM needs images of at least {win}x{win}")));
    }
    let k = gaussian_kernel();
    let (w, h) = (a.width, a.height);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for c in 0..3 {
        let x: Vec<f64> = (0..w * h).map(|p| a.data[p * a.channels + c]).collect();
        let y: Vec<f64> = (0..w * h).map(|p| b.data[p * b.channels + c]).collect();
        let prod = |f: &dyn Fn(f64, f64) -> f64| x.iter().zip(&y).map(|(&u, &v)| f(u, v)).collect::<Vec<_>>();
        let (mx, ow, oh) = filter_valid(&x, w, h, &k);
        let (my, _, _) = filter_valid(&y, w, h, &k);
        let (sxx, _, _) = filter_valid(&prod(&|u, _| u * u), w, h, &k);
        let (syy, _, _) = filter_valid(&prod(&|_, v| v * v), w, h, &k);
        let (sxy, _, _) = filter_valid(&prod(&|u, v| u * v), w, h, &k);
        let mut sum = 0.0;
        for i in 0..ow * oh {
            let vx = sxx[i] - mx[i] * mx[i];
            let vy = syy[i] - my[i] * my[i];
            let cov = sxy[i] - mx[i] * my[i];
            sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2))
                / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        total += sum / (ow * oh) as f64;
    }
    Ok(total / 3.0)
}

pub fn compute_metrics(rendered: &Image, ground_truth: &Image) -> Result<Metrics> {
    Ok(Metrics {
        psnr: psnr(rendered, ground_truth)?,
        ssim: ssim(rendered, ground_truth)?,
        l1: l1(rendered, ground_truth)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, 3, |x, y, c| ((x * 7 + y * 3 + c * 5) % 17) as f64 / 20.0)
    }

    #[test]
    fn identical_images_score_perfectly() {
        let a = ramp(20, 16);
        let m = compute_metrics(&a, &a).unwrap();
        assert_eq!(m.l1, 0.0);
        assert_eq!(m.psnr, PSNR_CAP);
        assert!((m.ssim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_offset_l1() {
        let a = ramp(20, 16);
        let mut b = a.clone();
        b.data.iter_mut().for_each(|v| *v += 0.1);
        assert!((l1(&b, &a).unwrap() - 0.1).abs() < 1e-12);
        assert!((psnr(&b, &a).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn rgba_input_uses_rgb_only() {
        let a = ramp(12, 12);
        let rgba = Image::from_fn(12, 12, 4, |x, y, c| if c == 3 { 0.3 } else { a.pixel(x, y)[c] });
        assert_eq!(l1(&rgba, &a).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(compute_metrics(&ramp(12, 12), &ramp(13, 12)), Err(Error::DimensionMismatch(_))));
    }
}
