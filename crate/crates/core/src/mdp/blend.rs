use rayon::prelude::*;

use super::{Mdp, MdpLayer, ShellPartition};
use crate::error::{Error, Result};
use crate::geometry::PanoMapping;

/// A single view's MDP together with its per-layer, per-pixel view weights.
#[derive(Clone, Debug, PartialEq)]
pub struct PerViewMdp {
    pub mdp: Mdp,
    pub weights: Vec<Vec<f32>>,
}

/// Running sums of the opacity-and-view weighted average across views.
///
/// Views must be added in a fixed order for bit-reproducible output.
#[derive(Clone, Debug)]
pub struct BlendAccumulator {
    mapping: PanoMapping,
    partition: ShellPartition,
    /// Per layer, per pixel: `[Σwα, Σwα·r, Σwα·g, Σwα·b, Σwα·D, Σwα·α]`.
    sums: Vec<Vec<[f64; 6]>>,
}

impl BlendAccumulator {
    pub fn new(mapping: PanoMapping, partition: ShellPartition) -> Self {
        let sums = vec![vec![[0.0; 6]; mapping.pixel_count()]; partition.shell_count()];
        BlendAccumulator {
            mapping,
            partition,
            sums,
        }
    }

    pub fn add(&mut self, view: &PerViewMdp) -> Result<()> {
        if view.mdp.mapping != self.mapping {
            return Err(Error::IncompatibleMdp(format!(
                "panorama mapping {:?} differs from {:?}",
                view.mdp.mapping, self.mapping
            )));
        }
        if view.mdp.partition != self.partition {
            return Err(Error::IncompatibleMdp("shell partitions differ".into()));
        }
        view.mdp.validate()?;
        if view.weights.len() != view.mdp.shell_count()
            || view.weights.iter().any(|w| w.len() != self.mapping.pixel_count())
        {
            return Err(Error::IncompatibleMdp("weight maps do not match the MDP".into()));
        }
        self.sums
            .par_iter_mut()
            .zip(&view.mdp.layers)
            .zip(&view.weights)
            .for_each(|((sums, layer), weights)| {
                for (px, s) in sums.iter_mut().enumerate() {
                    let a = layer.alpha[px] as f64;
                    let wa = weights[px] as f64 * a;
                    if wa == 0.0 {
                        continue;
                    }
                    s[0] += wa;
                    s[1] += wa * layer.color[3 * px] as f64;
                    s[2] += wa * layer.color[3 * px + 1] as f64;
                    s[3] += wa * layer.color[3 * px + 2] as f64;
                    s[4] += wa * layer.depth[px] as f64;
                    s[5] += wa * a;
                }
            });
        Ok(())
    }

    pub fn finish(self) -> Mdp {
        let layers = self
            .sums
            .into_par_iter()
            .enumerate()
            .map(|(m, sums)| {
                let mut layer = MdpLayer::empty(m, sums.len());
                for (px, s) in sums.iter().enumerate() {
                    if s[0] <= 0.0 {
                        continue;
                    }
                    for c in 0..3 {
                        layer.color[3 * px + c] = (s[1 + c] / s[0]) as f32;
                    }
                    layer.depth[px] = (s[4] / s[0]) as f32;
                    layer.alpha[px] = (s[5] / s[0]).min(1.0) as f32;
                }
                layer
            })
            .collect();
        Mdp {
            layers,
            mapping: self.mapping,
            partition: self.partition,
        }
    }
}

/// Blends per-view MDPs into a global MDP, weighting each view by `w^v α^v`.
pub fn blend_mdps(per_view: &[PerViewMdp]) -> Result<Mdp> {
    let first = per_view
        .first()
        .ok_or_else(|| Error::InvalidArgument("no per-view MDPs to blend".into()))?;
    let mut acc = BlendAccumulator::new(first.mdp.mapping, first.mdp.partition.clone());
    for v in per_view {
        acc.add(v)?;
    }
    Ok(acc.finish())
}
