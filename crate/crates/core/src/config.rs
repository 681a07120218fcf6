//! Versioned pipeline configuration (TOML).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PanoMapping, DEFAULT_PANO_HEIGHT, DEFAULT_PANO_WIDTH, DEFAULT_V_FOV_SLOPE};
use crate::mdp::{PartitionMode, ShellPartition};
use crate::mpi::{PhotoConsistencyEstimator, DEFAULT_ALPHA_MIN, DEFAULT_SIGMA0};
use crate::render::SoftZConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub input: InputConfig,
    pub psv: PsvConfig,
    pub estimator: EstimatorConfig,
    pub mdp: MdpConfig,
    pub render: RenderConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Decode 8/16-bit images from sRGB to linear on load.
    pub srgb_to_linear: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsvConfig {
    pub layers: usize,
    pub neighbors: usize,
    pub near: f64,
    pub far: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub sigma0: f64,
    pub alpha_min: f64,
    pub window_radius: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdpConfig {
    pub shells: usize,
    pub partition: PartitionMode,
    /// Defaults to `psv.near`.
    pub rho_min: Option<f64>,
    /// Defaults to `psv.far`.
    pub rho_max: Option<f64>,
    pub alpha_cull: f64,
    pub pano_width: usize,
    pub pano_height: usize,
    pub v_fov_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub tau: f64,
    pub epsilon: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            input: InputConfig::default(),
            psv: PsvConfig::default(),
            estimator: EstimatorConfig::default(),
            mdp: MdpConfig::default(),
            render: RenderConfig::default(),
        }
    }
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig { srgb_to_linear: true }
    }
}

impl Default for PsvConfig {
    fn default() -> Self {
        PsvConfig {
            layers: 32,
            neighbors: 4,
            near: 1.0,
            far: 100.0,
        }
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            sigma0: DEFAULT_SIGMA0,
            alpha_min: DEFAULT_ALPHA_MIN,
            window_radius: 0,
        }
    }
}

impl Default for MdpConfig {
    fn default() -> Self {
        MdpConfig {
            shells: 5,
            partition: PartitionMode::EquidistantRadius,
            rho_min: None,
            rho_max: None,
            alpha_cull: crate::mdp::DEFAULT_ALPHA_CULL,
            pano_width: DEFAULT_PANO_WIDTH,
            pano_height: DEFAULT_PANO_HEIGHT,
            v_fov_slope: DEFAULT_V_FOV_SLOPE,
        }
    }
}

impl Default for RenderConfig {
    fn default() -> Self {
        let z = SoftZConfig::default();
        RenderConfig {
            tau: z.tau,
            epsilon: z.epsilon,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::VersionMismatch {
                found: cfg.version,
                expected: CONFIG_VERSION,
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::VersionMismatch {
                found: self.version,
                expected: CONFIG_VERSION,
            });
        }
        crate::psv::disparity_ladder(self.psv.near, self.psv.far, self.psv.layers)?;
        if self.psv.neighbors == 0 {
            return Err(Error::InvalidArgument("psv.neighbors must be at least 1".into()));
        }
        if !(self.mdp.alpha_cull >= 0.0 && self.mdp.alpha_cull < 1.0) {
            return Err(Error::InvalidArgument("mdp.alpha_cull must lie in [0, 1)".into()));
        }
        self.estimator().validate()?;
        self.mapping()?;
        self.partition()?;
        self.soft_z()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn mapping(&self) -> Result<PanoMapping> {
        PanoMapping::new(self.mdp.pano_width, self.mdp.pano_height, self.mdp.v_fov_slope)
    }

    pub fn rho_range(&self) -> (f64, f64) {
        (
            self.mdp.rho_min.unwrap_or(self.psv.near),
            self.mdp.rho_max.unwrap_or(self.psv.far),
        )
    }

    pub fn partition(&self) -> Result<ShellPartition> {
        let (lo, hi) = self.rho_range();
        ShellPartition::new(lo, hi, self.mdp.shells, self.mdp.partition)
    }

    pub fn estimator(&self) -> PhotoConsistencyEstimator {
        PhotoConsistencyEstimator {
            sigma0: self.estimator.sigma0,
            alpha_min: self.estimator.alpha_min,
            window_radius: self.estimator.window_radius,
        }
    }

    pub fn soft_z(&self) -> Result<SoftZConfig> {
        SoftZConfig::new(self.render.tau, self.render.epsilon)
    }
}
