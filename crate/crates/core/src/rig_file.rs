//! Versioned TOML description of a calibrated camera rig.
//!
//! ```toml
//! version = 1
//!
//! [rig_center]            # optional, world -> rig; identity when omitted
//! rotation = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
//! translation = [0.0, 0.0, 0.0]
//!
//! [[cameras]]
//! image = "cam00.png"     # optional, relative to the image directory
//! fx = 107.4
//! fy = 107.4
//! cx = 127.5
//! cy = 127.5
//! width = 256
//! height = 256
//! rotation = [...]        # row-major world -> camera
//! translation = [...]
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, CameraRig, Extrinsics, Intrinsics};
use crate::raster::Image;

pub const RIG_FILE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseEntry {
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl PoseEntry {
    pub fn from_extrinsics(e: &Extrinsics) -> Self {
        let mut rotation = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                rotation[3 * r + c] = e.rotation[(r, c)];
            }
        }
        PoseEntry {
            rotation,
            translation: e.translation.into(),
        }
    }

    pub fn to_extrinsics(&self) -> Result<Extrinsics> {
        Extrinsics::new(Matrix3::from_row_slice(&self.rotation), Vector3::from(self.translation))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rig_center: Option<PoseEntry>,
    pub cameras: Vec<CameraEntry>,
}

fn calib(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::InvalidCalibration(format!("{}: {msg}", path.display()))
}

impl RigFile {
    pub fn from_rig(rig: &CameraRig, images: Option<&[String]>) -> Self {
        let cameras = rig
            .cameras
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let pose = PoseEntry::from_extrinsics(&c.extrinsics);
                let k = &c.intrinsics;
                CameraEntry {
                    image: images.and_then(|n| n.get(i).cloned()),
                    fx: k.fx,
                    fy: k.fy,
                    cx: k.cx,
                    cy: k.cy,
                    width: k.width,
                    height: k.height,
                    rotation: pose.rotation,
                    translation: pose.translation,
                }
            })
            .collect();
        let rig_center = (rig.rig_center != Extrinsics::identity()).then(|| PoseEntry::from_extrinsics(&rig.rig_center));
        RigFile {
            version: RIG_FILE_VERSION,
            rig_center,
            cameras,
        }
    }

    /// Every failure, including a missing or unreadable file, is reported as a
    /// calibration error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| calib(path, format!("cannot read rig file: {e}")))?;
        Self::from_toml_str(&text, path)
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let file: RigFile = toml::from_str(text).map_err(|e| calib(origin, e.to_string().trim_end()))?;
        if file.version != RIG_FILE_VERSION {
            return Err(calib(
                origin,
                format!("unsupported rig file version {} (expected {RIG_FILE_VERSION})", file.version),
            ));
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("rig serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn to_rig(&self) -> Result<CameraRig> {
        let cameras = self
            .cameras
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let intrinsics = Intrinsics::new(c.fx, c.fy, c.cx, c.cy, c.width, c.height)
                    .map_err(|e| Error::InvalidCalibration(format!("camera {i}: {e}")))?;
                let extrinsics = PoseEntry {
                    rotation: c.rotation,
                    translation: c.translation,
                }
                .to_extrinsics()
                .map_err(|e| Error::InvalidCalibration(format!("camera {i}: {e}")))?;
                Ok(Camera {
                    intrinsics,
                    extrinsics,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let center = match &self.rig_center {
            Some(p) => p.to_extrinsics()?,
            None => Extrinsics::identity(),
        };
        CameraRig::new(cameras, center)
    }

    /// Image path for each camera: the listed name, or `cam{i:02}.png`.
    pub fn image_paths(&self, image_dir: &Path) -> Vec<PathBuf> {
        self.cameras
            .iter()
            .enumerate()
            .map(|(i, c)| image_dir.join(c.image.clone().unwrap_or_else(|| default_image_name(i))))
            .collect()
    }
}

pub fn default_image_name(view: usize) -> String {
    format!("cam{view:02}.png")
}

/// Loads the rig and its images, checking that each image matches its camera.
pub fn load_rig_and_images(rig_path: &Path, image_dir: &Path, srgb_to_linear: bool) -> Result<(CameraRig, Vec<Image>)> {
    let file = RigFile::load(rig_path)?;
    let rig = file.to_rig()?;
    let images = file
        .image_paths(image_dir)
        .iter()
        .zip(&rig.cameras)
        .map(|(p, cam)| {
            let img = Image::load(p, srgb_to_linear)?;
            if img.width != cam.intrinsics.width || img.height != cam.intrinsics.height {
                return Err(Error::DimensionMismatch(format!(
                    "{} is {}x{} but its camera is {}x{}",
                    p.display(),
                    img.width,
                    img.height,
                    cam.intrinsics.width,
                    cam.intrinsics.height
                )));
            }
            Ok(img)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rig, images))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_ring() {
        let rig = CameraRig::ring(6, 0.1, 100.0, 32, 24).unwrap();
        let file = RigFile::from_rig(&rig, None);
        let back = RigFile::from_toml_str(&file.to_toml(), Path::new("mem")).unwrap().to_rig().unwrap();
        assert_eq!(back, rig);
        assert!(file.rig_center.is_none());
    }

    #[test]
    fn failures_are_calibration_errors() {
        let missing = RigFile::load(Path::new("/nonexistent/rig.toml"));
        assert!(matches!(missing, Err(Error::InvalidCalibration(_))));
        let bad = RigFile::from_toml_str("version = 1\ncameras = 3\n", Path::new("mem"));
        assert!(matches!(bad, Err(Error::InvalidCalibration(_))));
        let mut file = RigFile::from_rig(&CameraRig::ring(3, 0.1, 90.0, 8, 8).unwrap(), None);
        file.cameras[1].rotation[0] = 2.0;
        assert!(matches!(file.to_rig(), Err(Error::InvalidCalibration(_))));
    }

    #[test]
    fn image_names_default() {
        let file = RigFile::from_rig(&CameraRig::ring(3, 0.1, 90.0, 8, 8).unwrap(), Some(&["a.png".to_string()]));
        let p = file.image_paths(Path::new("imgs"));
        assert_eq!(p[0], Path::new("imgs/a.png"));
        assert_eq!(p[2], Path::new("imgs/cam02.png"));
    }
}
