//! Camera models, rig poses and the cylindrical panorama mapping.
//!
//! Conventions: right-handed frames, cameras look down `+z` with image `x` to
//! the right and image `y` down, the cylinder axis is the rig-frame `z` axis.
//! Every [`Extrinsics`] maps world coordinates into its local frame,
//! `x_local = R * x_world + t`. Perspective pixel centers sit at integer
//! coordinates; panorama pixel `(i, j)` covers `[i, i + 1) x [j, j + 1)`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for orthonormality and determinant checks on rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Centered pinhole with the given horizontal field of view in degrees and square pixels.
    pub fn from_hfov(hfov_deg: f64, width: usize, height: usize) -> Result<Self> {
        if !(hfov_deg > 0.0 && hfov_deg < 180.0) {
            return Err(Error::InvalidCalibration(format!(
                "horizontal field of view {hfov_deg} outside (0, 180)"
            )));
        }
        let f = width as f64 / (2.0 * (hfov_deg.to_radians() / 2.0).tan());
        Self::new(
            f,
            f,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidCalibration(format!(
                "focal lengths must be positive and finite (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCalibration("image size must be at least 1x1".into()));
        }
        Ok(())
    }

    pub fn hfov_degrees(&self) -> f64 {
        (2.0 * (self.width as f64 / (2.0 * self.fx)).atan()).to_degrees()
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// The 4x4 plane-sweep lifting: `(x, y, z, 1) -> (fx x/z + cx, fy y/z + cy, 1/z, 1)` up to scale.
    pub fn lifting_matrix(&self) -> Matrix4<f64> {
        Matrix4::new(
            self.fx, 0.0, self.cx, 0.0, //
            0.0, self.fy, self.cy, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, 1.0, 0.0,
        )
    }

    /// Camera-space viewing ray through a pixel, with unit `z` component.
    #[inline]
    pub fn ray(&self, xs: f64, ys: f64) -> Vector3<f64> {
        Vector3::new((xs - self.cx) / self.fx, (ys - self.cy) / self.fy, 1.0)
    }

    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        (
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        )
    }

    pub fn contains(&self, xs: f64, ys: f64) -> bool {
        xs >= 0.0 && ys >= 0.0 && xs <= (self.width - 1) as f64 && ys <= (self.height - 1) as f64
    }
}

/// Rigid world-to-local transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extrinsics {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Extrinsics {
    fn default() -> Self {
        Self::identity()
    }
}

impl Extrinsics {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let e = Extrinsics {
            rotation,
            translation,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn identity() -> Self {
        Extrinsics {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Pose of a frame centered at `center` whose local axes, expressed in world
    /// coordinates, are the columns of `local_to_world`.
    pub fn from_center(local_to_world: Matrix3<f64>, center: Vector3<f64>) -> Result<Self> {
        let rotation = local_to_world.transpose();
        Self::new(rotation, -(rotation * center))
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotation.iter().chain(self.translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCalibration("non-finite pose entry".into()));
        }
        let gram = self.rotation.transpose() * self.rotation;
        let ortho_err = (gram - Matrix3::identity()).abs().max();
        if ortho_err > ROTATION_TOLERANCE {
            return Err(Error::InvalidCalibration(format!(
                "rotation is not orthonormal (max |R^T R - I| = {ortho_err:.3e})"
            )));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidCalibration(format!(
                "rotation determinant {det} is not +1"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn apply_inverse(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    /// Frame origin in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Local `+z` axis in world coordinates.
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Composition `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Extrinsics) -> Extrinsics {
        Extrinsics {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Extrinsics {
        let rt = self.rotation.transpose();
        Extrinsics {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

/// A calibrated perspective camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub extrinsics: Extrinsics,
}

/// Default sanity bound on the distance of any camera center from the rig center.
pub const DEFAULT_RIG_RADIUS_BOUND: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct CameraRig {
    pub cameras: Vec<Camera>,
    pub rig_center: Extrinsics,
}

impl CameraRig {
    pub fn new(cameras: Vec<Camera>, rig_center: Extrinsics) -> Result<Self> {
        let rig = CameraRig {
            cameras,
            rig_center,
        };
        rig.validate(DEFAULT_RIG_RADIUS_BOUND)?;
        Ok(rig)
    }

    pub fn validate(&self, radius_bound: f64) -> Result<()> {
        if self.cameras.len() < 2 {
            return Err(Error::InvalidCalibration(format!(
                "rig needs at least 2 cameras, found {}",
                self.cameras.len()
            )));
        }
        self.rig_center.validate()?;
        let origin = self.rig_center.center();
        for (i, cam) in self.cameras.iter().enumerate() {
            cam.intrinsics
                .validate()
                .map_err(|e| Error::InvalidCalibration(format!("camera {i}: {e}")))?;
            cam.extrinsics
                .validate()
                .map_err(|e| Error::InvalidCalibration(format!("camera {i}: {e}")))?;
            let r = (cam.extrinsics.center() - origin).norm();
            if r > radius_bound {
                return Err(Error::InvalidCalibration(format!(
                    "camera {i} is {r:.3} m from the rig center (bound {radius_bound} m)"
                )));
            }
        }
        Ok(())
    }

    /// `k` outward-looking cameras evenly spaced on a horizontal circle around the
    /// rig center; camera 0 looks along `+x`, camera `i` is rotated by `2πi/k` about `+z`.
    pub fn ring(k: usize, radius: f64, hfov_deg: f64, width: usize, height: usize) -> Result<Self> {
        let intrinsics = Intrinsics::from_hfov(hfov_deg, width, height)?;
        let cameras = (0..k)
            .map(|i| {
                let theta = 2.0 * PI * i as f64 / k as f64;
                let (s, c) = theta.sin_cos();
                let local_to_world =
                    Matrix3::from_columns(&[
                        Vector3::new(s, -c, 0.0),
                        Vector3::new(0.0, 0.0, -1.0),
                        Vector3::new(c, s, 0.0),
                    ]);
                let extrinsics =
                    Extrinsics::from_center(local_to_world, Vector3::new(radius * c, radius * s, 0.0))?;
                Ok(Camera {
                    intrinsics,
                    extrinsics,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        CameraRig::new(cameras, Extrinsics::identity())
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }
}

/// Cylindrical coordinates about the rig `z` axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CylCoord {
    pub rho: f64,
    /// Azimuth in `[-π, π)`.
    pub phi: f64,
    pub z: f64,
}

#[inline]
pub fn to_cylindrical(p: &Vector3<f64>) -> CylCoord {
    let rho = p.x.hypot(p.y);
    let mut phi = if rho == 0.0 { 0.0 } else { p.y.atan2(p.x) };
    if phi >= PI {
        phi = -PI;
    }
    CylCoord { rho, phi, z: p.z }
}

#[inline]
pub fn from_cylindrical(c: &CylCoord) -> Vector3<f64> {
    let (s, co) = c.phi.sin_cos();
    Vector3::new(c.rho * co, c.rho * s, c.z)
}

/// Lifts MPI pixel `(xs, ys)` on the plane with inverse depth `inv_depth` into the rig frame.
pub fn unproject_mpi_pixel(
    xs: f64,
    ys: f64,
    inv_depth: f64,
    cam: &Camera,
    rig_center: &Extrinsics,
) -> Result<Vector3<f64>> {
    if !(inv_depth > 0.0 && inv_depth.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "inverse depth must be positive and finite, got {inv_depth}"
        )));
    }
    cam.intrinsics.validate()?;
    cam.extrinsics.validate()?;
    rig_center.validate()?;
    let p_cam = cam.intrinsics.ray(xs, ys) / inv_depth;
    let p_world = cam.extrinsics.apply_inverse(&p_cam);
    Ok(rig_center.apply(&p_world))
}

pub const DEFAULT_PANO_WIDTH: usize = 2560;
pub const DEFAULT_PANO_HEIGHT: usize = 640;
pub const DEFAULT_V_FOV_SLOPE: f64 = 1.0;

/// Equirectangular-in-azimuth, linear-in-slope cylindrical panorama layout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanoMapping {
    pub width: usize,
    pub height: usize,
    /// Half extent of `h = z / ρ` covered by the rows.
    pub v_fov_slope: f64,
}

impl Default for PanoMapping {
    fn default() -> Self {
        PanoMapping {
            width: DEFAULT_PANO_WIDTH,
            height: DEFAULT_PANO_HEIGHT,
            v_fov_slope: DEFAULT_V_FOV_SLOPE,
        }
    }
}

impl PanoMapping {
    pub fn new(width: usize, height: usize, v_fov_slope: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("panorama must be at least 1x1".into()));
        }
        if !(v_fov_slope > 0.0 && v_fov_slope.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "v_fov_slope must be positive, got {v_fov_slope}"
            )));
        }
        Ok(PanoMapping {
            width,
            height,
            v_fov_slope,
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn column_of(&self, phi: f64) -> f64 {
        let w = self.width as f64;
        let c = ((phi + PI) / (2.0 * PI) * w).rem_euclid(w);
        if c >= w {
            0.0
        } else {
            c
        }
    }

    #[inline]
    pub fn row_of(&self, h: f64) -> f64 {
        (1.0 - h / self.v_fov_slope) / 2.0 * self.height as f64
    }

    #[inline]
    pub fn phi_of(&self, col: f64) -> f64 {
        col / self.width as f64 * 2.0 * PI - PI
    }

    #[inline]
    pub fn slope_of(&self, row: f64) -> f64 {
        (1.0 - 2.0 * row / self.height as f64) * self.v_fov_slope
    }

    /// Azimuth and slope through the center of pixel `(col, row)`.
    #[inline]
    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.phi_of(col as f64 + 0.5),
            self.slope_of(row as f64 + 0.5),
        )
    }

    /// Continuous `(col, row)` of a cylindrical coordinate, `None` when outside the vertical extent.
    pub fn pano_pixel_of(&self, c: &CylCoord) -> Result<Option<(f64, f64)>> {
        if !(c.rho > 0.0) {
            return Err(Error::UndefinedAzimuth);
        }
        let h = c.z / c.rho;
        if h.abs() > self.v_fov_slope {
            return Ok(None);
        }
        Ok(Some((self.column_of(c.phi), self.row_of(h))))
    }

    /// Integer pixel containing a cylindrical coordinate.
    #[inline]
    pub fn pixel_index_of(&self, c: &CylCoord) -> Option<(usize, usize)> {
        if !(c.rho > 0.0) {
            return None;
        }
        let h = c.z / c.rho;
        if !(h.abs() <= self.v_fov_slope) {
            return None;
        }
        let col = (self.column_of(c.phi) as usize).min(self.width - 1);
        let row = (self.row_of(h).max(0.0) as usize).min(self.height - 1);
        Some((col, row))
    }
}

/// Explicit homogeneous product `E_w E_v^-1 I_v^-1 [xs, ys, 1/d, 1]^T`, normalized.
///
/// Slow reference path built from 4x4 matrix inverses; the pipeline uses
/// [`unproject_mpi_pixel`].
pub fn unproject_homogeneous(
    xs: f64,
    ys: f64,
    inv_depth: f64,
    cam: &Camera,
    rig_center: &Extrinsics,
) -> Result<Vector3<f64>> {
    let lift_inv = cam
        .intrinsics
        .lifting_matrix()
        .try_inverse()
        .ok_or_else(|| Error::InvalidCalibration("intrinsics not invertible".into()))?;
    let ev_inv = cam
        .extrinsics
        .matrix()
        .try_inverse()
        .ok_or_else(|| Error::InvalidCalibration("extrinsics not invertible".into()))?;
    let h = rig_center.matrix() * ev_inv * lift_inv * Vector4::new(xs, ys, inv_depth, 1.0);
    if h.w == 0.0 {
        return Err(Error::InvalidArgument("point at infinity".into()));
    }
    Ok(Vector3::new(h.x / h.w, h.y / h.w, h.z / h.w))
}
