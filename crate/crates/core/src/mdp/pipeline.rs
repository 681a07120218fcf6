use rayon::prelude::*;

use super::{
    bin_points, collapse_bin, mpi_to_cyl_points, BlendAccumulator, Mdp, PerViewMdp, ShellPartition,
};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::geometry::{CameraRig, PanoMapping};
use crate::mpi::{Mpi, MpiEstimator};
use crate::psv::build_psv;
use crate::raster::Image;

/// Plane sweep and MPI estimation for every rig view.
pub fn estimate_view_mpis(
    rig: &CameraRig,
    images: &[Image],
    cfg: &PipelineConfig,
    estimator: &dyn MpiEstimator,
) -> Result<Vec<Mpi>> {
    if images.len() != rig.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} images for a {}-camera rig",
            images.len(),
            rig.len()
        )));
    }
    let neighbors = cfg.psv.neighbors.min(rig.len() - 1);
    (0..rig.len())
        .into_par_iter()
        .map(|v| {
            let psv = build_psv(
                rig,
                images,
                v,
                cfg.psv.near,
                cfg.psv.far,
                cfg.psv.layers,
                neighbors,
            )?;
            estimator.estimate(&psv)
        })
        .collect()
}

/// Lifts, bins and collapses one view's MPI into its per-view MDP.
pub fn per_view_mdp(
    rig: &CameraRig,
    mpi: &Mpi,
    mapping: &PanoMapping,
    partition: &ShellPartition,
    alpha_cull: f64,
) -> Result<PerViewMdp> {
    let cam = rig
        .cameras
        .get(mpi.view)
        .ok_or_else(|| Error::InvalidArgument(format!("MPI for unknown view {}", mpi.view)))?;
    let cloud = mpi_to_cyl_points(mpi, cam, &rig.rig_center, alpha_cull)?;
    let bins = bin_points(&cloud, partition);
    drop(cloud);
    let mut layers = Vec::with_capacity(bins.len());
    let mut weights = Vec::with_capacity(bins.len());
    for (m, bin) in bins.iter().enumerate() {
        let c = collapse_bin(bin, mapping, m, partition.range(m));
        layers.push(c.layer);
        weights.push(c.weight);
    }
    Ok(PerViewMdp {
        mdp: Mdp {
            layers,
            mapping: *mapping,
            partition: partition.clone(),
        },
        weights,
    })
}

/// Views are processed in parallel batches but always accumulated in index
/// order, so the result does not depend on the worker count.
pub fn mdp_from_mpis(rig: &CameraRig, mpis: &[Mpi], cfg: &PipelineConfig) -> Result<Mdp> {
    let mapping = cfg.mapping()?;
    let partition = cfg.partition()?;
    let mut acc = BlendAccumulator::new(mapping, partition.clone());
    let batch = rayon::current_num_threads().max(1);
    for chunk in mpis.chunks(batch) {
        let views = chunk
            .par_iter()
            .map(|mpi| per_view_mdp(rig, mpi, &mapping, &partition, cfg.mdp.alpha_cull))
            .collect::<Result<Vec<_>>>()?;
        for v in &views {
            acc.add(v)?;
        }
    }
    Ok(acc.finish())
}

/// Full reconstruction: plane sweep, MPI estimation, cylindrical projection,
/// shell collapse and cross-view blending.
pub fn build_global_mdp(rig: &CameraRig, images: &[Image], cfg: &PipelineConfig) -> Result<Mdp> {
    let mpis = estimate_view_mpis(rig, images, cfg, &cfg.estimator())?;
    mdp_from_mpis(rig, &mpis, cfg)
}

/// A single RGBDα cylindrical panorama.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbdPanorama {
    pub mapping: PanoMapping,
    pub rho_min: f64,
    pub rho_max: f64,
    pub color: Vec<f32>,
    pub depth: Vec<f32>,
    pub alpha: Vec<f32>,
}

/// Direct RGBD panorama reconstruction: every view's MPI points are collapsed
/// into one panorama without any radius binning, then blended across views.
pub fn rgbd_from_mpis(rig: &CameraRig, mpis: &[Mpi], cfg: &PipelineConfig) -> Result<RgbdPanorama> {
    let mapping = cfg.mapping()?;
    let (rho_min, rho_max) = cfg.rho_range();
    // validates the radius range
    ShellPartition::new(rho_min, rho_max, 1, cfg.mdp.partition)?;
    let px = mapping.pixel_count();
    let mut sums = vec![[0.0f64; 6]; px];
    let batch = rayon::current_num_threads().max(1);
    for chunk in mpis.chunks(batch) {
        let views = chunk
            .par_iter()
            .map(|mpi| {
                let cam = rig.cameras.get(mpi.view).ok_or_else(|| {
                    Error::InvalidArgument(format!("MPI for unknown view {}", mpi.view))
                })?;
                let cloud = mpi_to_cyl_points(mpi, cam, &rig.rig_center, cfg.mdp.alpha_cull)?;
                Ok(collapse_bin(&cloud, &mapping, 0, (rho_min, rho_max)))
            })
            .collect::<Result<Vec<_>>>()?;
        for v in &views {
            for (p, s) in sums.iter_mut().enumerate() {
                let a = v.layer.alpha[p] as f64;
                let wa = v.weight[p] as f64 * a;
                if wa == 0.0 {
                    continue;
                }
                s[0] += wa;
                for c in 0..3 {
                    s[1 + c] += wa * v.layer.color[3 * p + c] as f64;
                }
                s[4] += wa * v.layer.depth[p] as f64;
                s[5] += wa * a;
            }
        }
    }
    let mut pano = RgbdPanorama {
        mapping,
        rho_min,
        rho_max,
        color: vec![0.0; 3 * px],
        depth: vec![0.0; px],
        alpha: vec![0.0; px],
    };
    for (p, s) in sums.iter().enumerate() {
        if s[0] <= 0.0 {
            continue;
        }
        for c in 0..3 {
            pano.color[3 * p + c] = (s[1 + c] / s[0]) as f32;
        }
        pano.depth[p] = (s[4] / s[0]) as f32;
        pano.alpha[p] = (s[5] / s[0]).min(1.0) as f32;
    }
    Ok(pano)
}

pub fn build_rgbd_panorama(
    rig: &CameraRig,
    images: &[Image],
    cfg: &PipelineConfig,
) -> Result<RgbdPanorama> {
    let mpis = estimate_view_mpis(rig, images, cfg, &cfg.estimator())?;
    rgbd_from_mpis(rig, &mpis, cfg)
}
