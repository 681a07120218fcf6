//! Analytic gradients of the rendered image with respect to the MDP planes.
//!
//! The output is treated as unclamped; `d_max` is held constant (the resolved
//! values do not depend on it unless the weight floor is active).

use rayon::prelude::*;

use super::splat::{accumulate, mdp_pixel_point, splat_records, LayerAccum};
use super::{LayerView, SoftZConfig, TargetCamera};
use crate::error::{Error, Result};
use crate::geometry::PanoMapping;
use crate::mdp::Mdp;

/// Gradients per shell, laid out like [`crate::mdp::MdpLayer`].
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradient {
    pub color: Vec<f64>,
    pub depth: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdpGradients {
    pub layers: Vec<LayerGradient>,
}

/// Gradient of `Σ grad_out · render(mdp)`; `grad_out` is RGBA per target pixel.
pub fn render_backward(
    mdp: &Mdp,
    target: &TargetCamera,
    zcfg: &SoftZConfig,
    grad_out: &[f64],
) -> Result<MdpGradients> {
    mdp.validate()?;
    render_layers_backward(&mdp.layer_views(), &mdp.mapping, target, zcfg, grad_out)
}

pub fn render_layers_backward(
    layers: &[LayerView<'_>],
    mapping: &PanoMapping,
    target: &TargetCamera,
    zcfg: &SoftZConfig,
    grad_out: &[f64],
) -> Result<MdpGradients> {
    target.validate()?;
    let (w, h) = target.size();
    let n = w * h;
    if grad_out.len() != 4 * n {
        return Err(Error::DimensionMismatch(format!(
            "output gradient has {} values, expected {}",
            grad_out.len(),
            4 * n
        )));
    }
    let px = mapping.pixel_count();
    for (m, l) in layers.iter().enumerate() {
        if l.alpha.len() != px || l.depth.len() != px || l.color.len() != 3 * px {
            return Err(Error::DimensionMismatch(format!("layer {m} buffers do not match the mapping")));
        }
    }

    let accs: Vec<_> = layers
        .iter()
        .map(|l| {
            let records = splat_records(l, mapping, target);
            let acc = accumulate(&records, target, zcfg);
            (records, acc)
        })
        .collect();

    // front transmittance per layer, innermost first
    let mut trans = vec![vec![1.0f64; n]; layers.len()];
    for m in 1..layers.len() {
        let (prev, rest) = trans.split_at_mut(m);
        let acc = &accs[m - 1].1;
        for q in 0..n {
            rest[0][q] = prev[m - 1][q] * (1.0 - acc.resolved(q, zcfg).1);
        }
    }

    let mut back = vec![[0.0f64; 4]; n];
    let mut out = Vec::with_capacity(layers.len());
    for m in (0..layers.len()).rev() {
        let (records, acc) = &accs[m];
        // gradient with respect to resolved color (3) and opacity (1)
        let mut g_res = vec![[0.0f64; 4]; n];
        for q in 0..n {
            let (c, a) = acc.resolved(q, zcfg);
            let t = trans[m][q];
            let g = &grad_out[4 * q..4 * q + 4];
            let b = back[q];
            let mut ga = g[3] * (1.0 - b[3]);
            for k in 0..3 {
                g_res[q][k] = g[k] * t * a;
                ga += g[k] * (c[k] - b[k]);
            }
            g_res[q][3] = t * ga;
            crate::compositing::over_premultiplied(&mut back[q], [c[0] * a, c[1] * a, c[2] * a, a]);
        }
        out.push(layer_gradient(&layers[m], mapping, target, zcfg, records, acc, &g_res));
    }
    out.reverse();
    Ok(MdpGradients { layers: out })
}

fn layer_gradient(
    layer: &LayerView<'_>,
    mapping: &PanoMapping,
    target: &TargetCamera,
    zcfg: &SoftZConfig,
    records: &[super::splat::SplatRecord],
    acc: &LayerAccum,
    g_res: &[[f64; 4]],
) -> LayerGradient {
    let per_record: Vec<(usize, [f64; 5])> = records
        .par_iter()
        .map(|r| {
            let p = mdp_pixel_point(mapping, r.source, layer.depth[r.source] as f64);
            let radius = layer.depth[r.source] as f64;
            let (_, jac) = target
                .project_with_jacobian(&p)
                .expect("splatted point projects");
            let dp = p / radius;
            let d = jac * dp;
            let (du, dv, dd) = (d[0], d[1], d[2]);
            let mut g = [0.0f64; 5];
            for (k, q) in r.footprint.pixels.iter().enumerate() {
                let (Some(q), wk) = (*q, r.footprint.weights[k]) else { continue };
                if !(wk > 0.0) || acc.weight[q] <= 0.0 {
                    continue;
                }
                let e = ((r.inv_depth - acc.d_max[q]) * zcfg.tau).exp();
                let big_w = wk * e;
                let s_w = acc.weight[q];
                let clamped = s_w < zcfg.epsilon;
                let den = s_w.max(zcfg.epsilon);
                let (cbar, abar) = acc.resolved(q, zcfg);
                let gq = g_res[q];
                let mut g_w = 0.0;
                for c in 0..3 {
                    g[c] += gq[c] * big_w / den;
                    g_w += gq[c] * if clamped { r.color[c] / den } else { (r.color[c] - cbar[c]) / s_w };
                }
                g[4] += gq[3] * big_w / den;
                g_w += gq[3] * if clamped { r.alpha / den } else { (r.alpha - abar) / s_w };
                let dw = e * (r.footprint.dw_du[k] * du + r.footprint.dw_dv[k] * dv) + zcfg.tau * big_w * dd;
                g[3] += g_w * dw;
            }
            (r.source, g)
        })
        .collect();
    let px = mapping.pixel_count();
    let mut lg = LayerGradient {
        color: vec![0.0; 3 * px],
        depth: vec![0.0; px],
        alpha: vec![0.0; px],
    };
    for (s, g) in per_record {
        for c in 0..3 {
            lg.color[3 * s + c] += g[c];
        }
        lg.depth[s] += g[3];
        lg.alpha[s] += g[4];
    }
    lg
}
