use rayon::prelude::*;

use super::{CylPoint, MdpLayer};
use crate::compositing::over_premultiplied;
use crate::geometry::PanoMapping;

/// One collapsed shell of a single view, plus the per-pixel view weight
/// composited alongside color and radius.
#[derive(Clone, Debug, PartialEq)]
pub struct CollapsedLayer {
    pub layer: MdpLayer,
    pub weight: Vec<f32>,
}

/// Straight-alpha RGBDα value of one panorama pixel plus its view weight.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CollapsedSample {
    pub color: [f64; 3],
    pub depth: f64,
    pub alpha: f64,
    pub weight: f64,
}

/// Over-composites samples back to front (ascending source plane, stable for ties).
///
/// Radius and view weight are composited with the same weights as color and
/// then normalized by the final opacity. Radii are clamped to `radius_range`.
pub fn collapse_samples(samples: &[CylPoint], radius_range: (f64, f64)) -> CollapsedSample {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by_key(|&i| samples[i].layer);
    // [r, g, b, a] and [depth, weight, _, a] share the alpha channel
    let mut rgba = [0.0f64; 4];
    let mut dw = [0.0f64; 4];
    for &i in &order {
        let p = &samples[i];
        let a = p.alpha as f64;
        let rho = p.coord.rho.clamp(radius_range.0, radius_range.1);
        over_premultiplied(
            &mut rgba,
            [p.color[0] as f64 * a, p.color[1] as f64 * a, p.color[2] as f64 * a, a],
        );
        over_premultiplied(&mut dw, [rho * a, p.weight as f64 * a, 0.0, a]);
    }
    let alpha = rgba[3];
    if alpha <= 0.0 {
        return CollapsedSample::default();
    }
    CollapsedSample {
        color: [rgba[0] / alpha, rgba[1] / alpha, rgba[2] / alpha],
        depth: dw[0] / alpha,
        alpha,
        weight: dw[1] / alpha,
    }
}

/// Collapses one bin of a view's point cloud into a single RGBDα panorama.
pub fn collapse_bin(
    points: &[CylPoint],
    mapping: &PanoMapping,
    shell: usize,
    radius_range: (f64, f64),
) -> CollapsedLayer {
    let (w, h) = (mapping.width, mapping.height);
    let pixel_of: Vec<Option<usize>> = points
        .par_iter()
        .map(|p| mapping.pixel_index_of(&p.coord).map(|(c, r)| r * w + c))
        .collect();

    // stable counting sort of point indices by pixel
    let mut start = vec![0usize; w * h + 1];
    for px in pixel_of.iter().flatten() {
        start[px + 1] += 1;
    }
    for i in 0..w * h {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut sorted = vec![0usize; start[w * h]];
    for (i, px) in pixel_of.iter().enumerate() {
        if let Some(px) = px {
            sorted[fill[*px]] = i;
            fill[*px] += 1;
        }
    }

    let rows: Vec<Vec<CollapsedSample>> = (0..h)
        .into_par_iter()
        .map(|row| {
            let mut scratch = Vec::new();
            (0..w)
                .map(|col| {
                    let px = row * w + col;
                    let idx = &sorted[start[px]..start[px + 1]];
                    if idx.is_empty() {
                        return CollapsedSample::default();
                    }
                    scratch.clear();
                    scratch.extend(idx.iter().map(|&i| points[i]));
                    collapse_samples(&scratch, radius_range)
                })
                .collect()
        })
        .collect();

    let mut layer = MdpLayer::empty(shell, w * h);
    let mut weight = vec![0f32; w * h];
    for (px, s) in rows.into_iter().flatten().enumerate() {
        if s.alpha <= 0.0 {
            continue;
        }
        for c in 0..3 {
            layer.color[3 * px + c] = s.color[c] as f32;
        }
        layer.depth[px] = s.depth as f32;
        layer.alpha[px] = s.alpha as f32;
        weight[px] = s.weight as f32;
    }
    CollapsedLayer { layer, weight }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CylCoord;

    fn pt(rho: f64, color: f32, alpha: f32, layer: u32) -> CylPoint {
        CylPoint {
            coord: CylCoord { rho, phi: 0.1, z: 0.0 },
            color: [color; 3],
            alpha,
            layer,
            view: 0,
            weight: 1.0,
        }
    }

    #[test]
    fn single_opaque_point() {
        let s = collapse_samples(&[pt(2.5, 0.3, 1.0, 0)], (0.0, 10.0));
        assert_eq!(s.alpha, 1.0);
        assert!((s.color[0] - 0.3).abs() < 1e-7);
        assert_eq!(s.depth, 2.5);
    }

    #[test]
    fn opaque_front_wins() {
        // layer 5 is nearer to the camera than layer 1
        let s = collapse_samples(&[pt(2.0, 0.2, 1.0, 5), pt(4.0, 0.9, 0.7, 1)], (0.0, 10.0));
        assert!((s.color[0] - 0.2).abs() < 1e-7);
        assert_eq!(s.depth, 2.0);
        assert_eq!(s.alpha, 1.0);
    }

    #[test]
    fn depth_is_alpha_weighted() {
        let s = collapse_samples(&[pt(2.0, 0.0, 0.5, 1), pt(4.0, 0.0, 1.0, 0)], (0.0, 10.0));
        // front contributes 0.5 * 2, back 0.5 * 4
        assert!((s.depth - 3.0).abs() < 1e-12);
        assert_eq!(s.alpha, 1.0);
    }

    #[test]
    fn empty_pixels_are_zero() {
        let mapping = PanoMapping::new(8, 4, 1.0).unwrap();
        let c = collapse_bin(&[pt(2.0, 0.5, 1.0, 0)], &mapping, 0, (1.0, 3.0));
        let occupied = c.layer.alpha.iter().filter(|&&a| a > 0.0).count();
        assert_eq!(occupied, 1);
        for (px, &a) in c.layer.alpha.iter().enumerate() {
            if a == 0.0 {
                assert_eq!(c.layer.depth[px], 0.0);
                assert_eq!(c.layer.color[3 * px], 0.0);
            }
        }
    }

    #[test]
    fn radius_is_clamped_into_range() {
        let s = collapse_samples(&[pt(0.5, 0.5, 1.0, 0)], (1.0, 3.0));
        assert_eq!(s.depth, 1.0);
    }
}
