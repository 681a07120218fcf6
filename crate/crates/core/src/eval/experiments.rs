//! Layer-count and translation sweeps against the ray-cast oracle.

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, MetricsReport};
use super::raycast::{raycast_render, render_rig_views, world_target};
use super::scene::SyntheticScene;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::geometry::{CameraRig, Extrinsics, PanoMapping};
use crate::mdp::{estimate_view_mpis, mdp_from_mpis, Mdp};
use crate::render::{render, SoftZConfig, TargetCamera};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub report: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub name: String,
    /// What `SweepRow::value` holds.
    pub parameter: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

impl fmt::Display for SweepTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {}", self.name)?;
        writeln!(f, "{:>12} {:>9} {:>8} {:>9}", self.parameter, "PSNR", "SSIM", "L1")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>12} {:>9.3} {:>8.4} {:>9.5}",
                r.value, r.report.mean.psnr, r.report.mean.ssim, r.report.mean.l1
            )?;
        }
        Ok(())
    }
}

/// Renders every target from `mdp` and scores it against the oracle.
/// Targets are posed in the rig frame.
pub fn evaluate_targets(
    mdp: &Mdp,
    scene: &SyntheticScene,
    rig: &CameraRig,
    targets: &[TargetCamera],
    zcfg: &SoftZConfig,
) -> Result<MetricsReport> {
    let frames = targets
        .iter()
        .map(|t| {
            let out = render(mdp, t, zcfg)?;
            let gt = raycast_render(scene, &world_target(t, &rig.rig_center));
            compute_metrics(&out.image, &gt.color)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::from_frames(frames))
}

/// One row per shell count. Rig views and per-view MPIs are computed once and
/// shared by every row.
pub fn layer_sweep_experiment(
    scene: &SyntheticScene,
    rig: &CameraRig,
    cfg: &PipelineConfig,
    m_values: &[usize],
    targets: &[TargetCamera],
) -> Result<SweepTable> {
    if m_values.is_empty() || targets.is_empty() {
        return Err(Error::InvalidArgument("sweep needs shell counts and targets".into()));
    }
    let images = render_rig_views(scene, rig);
    let mpis = estimate_view_mpis(rig, &images, cfg, &cfg.estimator())?;
    let zcfg = cfg.soft_z()?;
    let mut rows = Vec::with_capacity(m_values.len());
    for &m in m_values {
        let mut c = cfg.clone();
        c.mdp.shells = m;
        c.validate()?;
        let mdp = mdp_from_mpis(rig, &mpis, &c)?;
        rows.push(SweepRow {
            value: m as f64,
            report: evaluate_targets(&mdp, scene, rig, targets, &zcfg)?,
        });
    }
    Ok(SweepTable {
        name: "layer sweep".into(),
        parameter: "layers".into(),
        rows,
    })
}

/// Directions the disparity sweep translates each base target along.
pub const SWEEP_DIRECTIONS: [[f64; 3]; 4] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]];

/// `target` with its center moved by `offset` (rig frame), orientation kept.
pub fn translated(target: &TargetCamera, offset: Vector3<f64>) -> Result<TargetCamera> {
    let pose = Extrinsics::from_center(target.pose.rotation.transpose(), target.center() + offset)?;
    Ok(TargetCamera { mode: target.mode, pose })
}

/// One row per translation magnitude; each base target is moved by the
/// magnitude along every direction in [`SWEEP_DIRECTIONS`].
pub fn disparity_sweep_experiment(
    scene: &SyntheticScene,
    rig: &CameraRig,
    cfg: &PipelineConfig,
    translation_magnitudes: &[f64],
    targets: &[TargetCamera],
) -> Result<SweepTable> {
    if translation_magnitudes.is_empty() || targets.is_empty() {
        return Err(Error::InvalidArgument("sweep needs translations and targets".into()));
    }
    let images = render_rig_views(scene, rig);
    let mpis = estimate_view_mpis(rig, &images, cfg, &cfg.estimator())?;
    let mdp = mdp_from_mpis(rig, &mpis, cfg)?;
    let zcfg = cfg.soft_z()?;
    let mut rows = Vec::with_capacity(translation_magnitudes.len());
    for &mag in translation_magnitudes {
        let moved = targets
            .iter()
            .flat_map(|t| SWEEP_DIRECTIONS.iter().map(move |d| translated(t, Vector3::from(*d) * mag)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(SweepRow {
            value: mag,
            report: evaluate_targets(&mdp, scene, rig, &moved, &zcfg)?,
        });
    }
    Ok(SweepTable {
        name: "translation sweep".into(),
        parameter: "translation_m".into(),
        rows,
    })
}

/// Desk-scale evaluation rig: 16 outward cameras with 100 degree field of view.
pub fn standard_rig(image_size: usize) -> Result<CameraRig> {
    CameraRig::ring(16, 0.15, 100.0, image_size, image_size)
}

/// Pipeline settings matched to [`SyntheticScene::standard`].
pub fn standard_config() -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.psv.near = 1.0;
    c.psv.far = 8.0;
    c.psv.layers = 32;
    c.mdp.pano_width = 640;
    c.mdp.pano_height = 320;
    c.estimator.sigma0 = 0.02;
    c.estimator.window_radius = 2;
    c
}

/// Image size of [`standard_rig`] views; finer than the panorama so that every
/// panorama pixel receives samples.
pub const STANDARD_VIEW_SIZE: usize = 384;

/// Four panorama targets `offset` meters from the rig center along `±x`, `±y`.
pub fn ring_targets(mapping: PanoMapping, offset: f64) -> Result<Vec<TargetCamera>> {
    let offsets: Vec<[f64; 3]> = SWEEP_DIRECTIONS.iter().map(|d| d.map(|v| v * offset)).collect();
    panorama_targets(mapping, &offsets)
}

/// Panorama targets at the given offsets from the rig center.
pub fn panorama_targets(mapping: PanoMapping, offsets: &[[f64; 3]]) -> Result<Vec<TargetCamera>> {
    offsets
        .iter()
        .map(|o| translated(&TargetCamera::panorama(mapping, Extrinsics::identity()), Vector3::from(*o)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (SyntheticScene, CameraRig, PipelineConfig) {
        let rig = CameraRig::ring(8, 0.1, 100.0, 24, 24).unwrap();
        let mut cfg = standard_config();
        cfg.psv.layers = 6;
        cfg.mdp.pano_width = 48;
        cfg.mdp.pano_height = 16;
        (SyntheticScene::two_cylinders(2.0, 5.0), rig, cfg)
    }

    #[test]
    fn table_shapes() {
        let (scene, rig, cfg) = tiny();
        let targets = panorama_targets(cfg.mapping().unwrap(), &[[0.0; 3]]).unwrap();
        let t = layer_sweep_experiment(&scene, &rig, &cfg, &[1, 2, 3], &targets).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.rows.iter().map(|r| r.value).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0]);
        let d = disparity_sweep_experiment(&scene, &rig, &cfg, &[0.0, 0.1], &targets).unwrap();
        assert_eq!(d.rows.len(), 2);
        assert_eq!(d.rows[0].report.frames.len(), 4);
        let json: SweepTable = serde_json::from_str(&d.to_json()).unwrap();
        assert_eq!(json, d);
        assert!(format!("{t}").lines().count() == 5);
    }

    #[test]
    fn translation_keeps_orientation() {
        let m = PanoMapping::new(8, 4, 1.0).unwrap();
        let t = translated(&TargetCamera::panorama(m, Extrinsics::identity()), Vector3::new(0.1, 0.0, 0.2)).unwrap();
        assert_eq!(t.pose.rotation, nalgebra::Matrix3::identity());
        assert!((t.center() - Vector3::new(0.1, 0.0, 0.2)).norm() < 1e-15);
    }
}
