//! JSON pose protocol shared by `mdp render` pose files and the HTTP service.
//!
//! Orientation is a unit quaternion `[w, x, y, z]` rotating the viewer body
//! frame (x forward, y left, z up) into the rig frame, so the identity looks
//! along rig `+x` with rig `+z` up. Panorama targets use the body frame as
//! their cylinder frame; perspective targets look along body `+x`.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Extrinsics, Intrinsics, PanoMapping};
use crate::render::TargetCamera;

pub const QUATERNION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoseMode {
    Panorama,
    Perspective,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRequest {
    #[serde(default)]
    pub frame_id: u64,
    /// Meters, rig frame.
    pub position: [f64; 3],
    /// `[w, x, y, z]`.
    pub orientation: [f64; 4],
    pub mode: PoseMode,
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view for perspective targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hfov_deg: Option<f64>,
    /// Vertical extent `tan(elevation)` for panorama targets; defaults to the MDP's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_fov_slope: Option<f64>,
    /// Client session for stale-frame tracking.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
}

pub const DEFAULT_HFOV_DEG: f64 = 90.0;

/// Columns: camera x (right), y (down), z (forward) expressed in the body frame.
fn perspective_axes() -> Matrix3<f64> {
    Matrix3::from_columns(&[
        Vector3::new(0.0, -1.0, 0.0),
        Vector3::new(0.0, 0.0, -1.0),
        Vector3::new(1.0, 0.0, 0.0),
    ])
}

impl PoseRequest {
    pub fn identity(mode: PoseMode, width: usize, height: usize) -> Self {
        PoseRequest {
            frame_id: 0,
            position: [0.0; 3],
            orientation: [1.0, 0.0, 0.0, 0.0],
            mode,
            width,
            height,
            hfov_deg: None,
            v_fov_slope: None,
            session: None,
        }
    }

    pub fn rotation(&self) -> Result<UnitQuaternion<f64>> {
        let [w, x, y, z] = self.orientation;
        let q = Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !n.is_finite() || (n - 1.0).abs() > QUATERNION_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "orientation must be a unit quaternion (norm {n})"
            )));
        }
        Ok(UnitQuaternion::new_unchecked(q))
    }

    /// Target camera for this pose; `default_slope` applies to panoramas
    /// without an explicit vertical extent.
    pub fn target(&self, default_slope: f64) -> Result<TargetCamera> {
        if self.position.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("position must be finite".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("width and height must be positive".into()));
        }
        let body = self.rotation()?.to_rotation_matrix().into_inner();
        let center = Vector3::from(self.position);
        Ok(match self.mode {
            PoseMode::Panorama => {
                let m = PanoMapping::new(self.width, self.height, self.v_fov_slope.unwrap_or(default_slope))?;
                TargetCamera::panorama(m, Extrinsics::from_center(body, center)?)
            }
            PoseMode::Perspective => {
                let k = Intrinsics::from_hfov(self.hfov_deg.unwrap_or(DEFAULT_HFOV_DEG), self.width, self.height)?;
                TargetCamera::perspective(k, Extrinsics::from_center(body * perspective_axes(), center)?)
            }
        })
    }
}

/// A pose file holds one request or an array of them.
#[derive(Deserialize)]
#[serde(untagged)]
enum PoseFile {
    One(PoseRequest),
    Many(Vec<PoseRequest>),
}

pub fn parse_pose_file(text: &str, origin: &std::path::Path) -> Result<Vec<PoseRequest>> {
    let parsed: PoseFile = serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?;
    Ok(match parsed {
        PoseFile::One(p) => vec![p],
        PoseFile::Many(v) => v,
    })
}

/// `n` poses evenly spaced in yaw on a horizontal circle of `radius` around the
/// rig center, each looking outward.
pub fn orbit(n: usize, radius: f64, mode: PoseMode, width: usize, height: usize) -> Vec<PoseRequest> {
    (0..n)
        .map(|i| {
            let yaw = std::f64::consts::TAU * i as f64 / n as f64;
            let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);
            PoseRequest {
                frame_id: i as u64,
                position: [radius * yaw.cos(), radius * yaw.sin(), 0.0],
                orientation: [q.w, q.i, q.j, q.k],
                ..PoseRequest::identity(mode, width, height)
            }
        })
        .collect()
}
