//! Multi depth panoramas: concentric cylindrical RGBDα shells.
//!
//! Per-view MPIs are lifted into a point cloud in cylindrical coordinates,
//! binned by radius into shells, collapsed per shell with over compositing and
//! finally blended across views into one global [`Mdp`].

mod blend;
mod collapse;
pub mod container;
mod pipeline;
mod points;

pub use blend::{blend_mdps, BlendAccumulator, PerViewMdp};
pub use collapse::{collapse_bin, collapse_samples, CollapsedLayer, CollapsedSample};
pub use pipeline::{
    build_global_mdp, build_rgbd_panorama, estimate_view_mpis, mdp_from_mpis, per_view_mdp,
    rgbd_from_mpis, RgbdPanorama,
};
pub use points::{bin_points, mpi_to_cyl_points, CylPoint, CylPointCloud, DEFAULT_ALPHA_CULL};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PanoMapping;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    #[default]
    EquidistantRadius,
    EquidistantInverseRadius,
}

/// Radius ranges of the `m` shells.
#[derive(Clone, Debug, PartialEq)]
pub struct ShellPartition {
    rho_min: f64,
    rho_max: f64,
    mode: PartitionMode,
    boundaries: Vec<f64>,
}

impl ShellPartition {
    pub fn new(rho_min: f64, rho_max: f64, m: usize, mode: PartitionMode) -> Result<Self> {
        if !(rho_min > 0.0 && rho_max > rho_min && rho_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < rho_min < rho_max < inf, got {rho_min}, {rho_max}"
            )));
        }
        if m == 0 {
            return Err(Error::InvalidArgument("an MDP needs at least one shell".into()));
        }
        let mut boundaries: Vec<f64> = (0..=m)
            .map(|i| {
                let t = i as f64 / m as f64;
                match mode {
                    PartitionMode::EquidistantRadius => rho_min + (rho_max - rho_min) * t,
                    PartitionMode::EquidistantInverseRadius => {
                        1.0 / (1.0 / rho_min + (1.0 / rho_max - 1.0 / rho_min) * t)
                    }
                }
            })
            .collect();
        boundaries[0] = rho_min;
        boundaries[m] = rho_max;
        if boundaries.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "shell boundaries are not strictly increasing".into(),
            ));
        }
        Ok(ShellPartition {
            rho_min,
            rho_max,
            mode,
            boundaries,
        })
    }

    pub fn rho_min(&self) -> f64 {
        self.rho_min
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn mode(&self) -> PartitionMode {
        self.mode
    }

    pub fn shell_count(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// `m + 1` increasing radii, first `rho_min`, last `rho_max`.
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn range(&self, shell: usize) -> (f64, f64) {
        (self.boundaries[shell], self.boundaries[shell + 1])
    }

    /// Bin `m` holds `[b_m, b_{m+1})`; radii outside `[rho_min, rho_max)` clamp to the end bins.
    #[inline]
    pub fn bin_of(&self, rho: f64) -> usize {
        let m = self.shell_count();
        let above = self.boundaries[1..m].partition_point(|&b| b <= rho);
        above.min(m - 1)
    }
}

/// One shell of an MDP: straight color, radius and opacity per panorama pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct MdpLayer {
    pub shell: usize,
    /// Interleaved RGB, row-major, row 0 at the top.
    pub color: Vec<f32>,
    /// Cylindrical radius in meters, 0 where transparent.
    pub depth: Vec<f32>,
    pub alpha: Vec<f32>,
}

impl MdpLayer {
    pub fn empty(shell: usize, pixels: usize) -> Self {
        MdpLayer {
            shell,
            color: vec![0.0; 3 * pixels],
            depth: vec![0.0; pixels],
            alpha: vec![0.0; pixels],
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.alpha.len()
    }
}

/// Multi depth panorama, layers ordered by increasing shell radius.
#[derive(Clone, Debug, PartialEq)]
pub struct Mdp {
    pub layers: Vec<MdpLayer>,
    pub mapping: PanoMapping,
    pub partition: ShellPartition,
}

/// Float planes stored per layer: C.r, C.g, C.b, D, α.
pub const PLANES_PER_LAYER: usize = 5;

impl Mdp {
    pub fn empty(mapping: PanoMapping, partition: ShellPartition) -> Self {
        let layers = (0..partition.shell_count())
            .map(|m| MdpLayer::empty(m, mapping.pixel_count()))
            .collect();
        Mdp {
            layers,
            mapping,
            partition,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != self.partition.shell_count() {
            return Err(Error::IncompatibleMdp(format!(
                "{} layers for {} shells",
                self.layers.len(),
                self.partition.shell_count()
            )));
        }
        let px = self.mapping.pixel_count();
        for (m, layer) in self.layers.iter().enumerate() {
            if layer.shell != m
                || layer.alpha.len() != px
                || layer.depth.len() != px
                || layer.color.len() != 3 * px
            {
                return Err(Error::IncompatibleMdp(format!("layer {m} has inconsistent buffers")));
            }
        }
        Ok(())
    }

    pub fn shell_count(&self) -> usize {
        self.layers.len()
    }

    /// Size of the float32 plane data: `M * 5 * W * H * 4` bytes.
    pub fn payload_bytes(&self) -> u64 {
        payload_bytes(self.mapping.width, self.mapping.height, self.shell_count())
    }

    /// Inner radius of the innermost shell holding any opaque content.
    pub fn innermost_occupied_radius(&self) -> Option<f64> {
        self.layers
            .iter()
            .position(|l| l.alpha.iter().any(|&a| a > 0.0))
            .map(|m| self.partition.range(m).0)
    }
}

pub fn payload_bytes(width: usize, height: usize, shells: usize) -> u64 {
    (width as u64) * (height as u64) * (shells as u64) * (PLANES_PER_LAYER as u64) * 4
}

/// Storage line in the style `Dimension 2560 x 640 x 5 x 5 | Storage 0.164GB (163840000 bytes)`.
pub fn footprint_line(width: usize, height: usize, shells: usize) -> String {
    let bytes = payload_bytes(width, height, shells);
    format!(
        "Dimension {width} x {height} x {shells} x {PLANES_PER_LAYER} | Storage {:.3}GB ({bytes} bytes)",
        bytes as f64 / 1e9
    )
}
