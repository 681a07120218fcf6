//! Novel view synthesis from an MDP by forward splatting.
//!
//! Each shell is splatted independently with a 2x2 bilinear kernel; conflicts
//! inside a shell are resolved by a soft z-buffer over inverse depth; the
//! resolved shell maps are then over-composited from the outermost shell in.

mod backward;
mod sequence;
mod softz;
pub mod splat;

pub use backward::{render_backward, render_layers_backward, MdpGradients};
pub use sequence::{render_sequence, SequenceFrame};
pub use softz::{soft_z_resolve, Contribution, SoftZConfig, DEFAULT_EPSILON, DEFAULT_TAU};

use crate::compositing::over_premultiplied;
use crate::error::{Error, Result};
use crate::geometry::{Extrinsics, Intrinsics, PanoMapping};
use crate::mdp::{Mdp, RgbdPanorama};
use crate::raster::Image;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetMode {
    Perspective(Intrinsics),
    Panorama(PanoMapping),
}

/// Output camera; `pose` maps rig-frame points into the camera frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetCamera {
    pub mode: TargetMode,
    pub pose: Extrinsics,
}

impl TargetCamera {
    pub fn perspective(intrinsics: Intrinsics, pose: Extrinsics) -> Self {
        TargetCamera {
            mode: TargetMode::Perspective(intrinsics),
            pose,
        }
    }

    pub fn panorama(mapping: PanoMapping, pose: Extrinsics) -> Self {
        TargetCamera {
            mode: TargetMode::Panorama(mapping),
            pose,
        }
    }

    pub fn size(&self) -> (usize, usize) {
        match &self.mode {
            TargetMode::Perspective(k) => (k.width, k.height),
            TargetMode::Panorama(m) => (m.width, m.height),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pose.validate()?;
        match &self.mode {
            TargetMode::Perspective(k) => k.validate(),
            TargetMode::Panorama(m) => PanoMapping::new(m.width, m.height, m.v_fov_slope).map(|_| ()),
        }
    }

    /// Camera center in the rig frame.
    pub fn center(&self) -> nalgebra::Vector3<f64> {
        self.pose.center()
    }
}

/// Borrowed planes of one shell.
#[derive(Clone, Copy, Debug)]
pub struct LayerView<'a> {
    pub color: &'a [f32],
    pub depth: &'a [f32],
    pub alpha: &'a [f32],
}

impl Mdp {
    pub fn layer_views(&self) -> Vec<LayerView<'_>> {
        self.layers
            .iter()
            .map(|l| LayerView {
                color: &l.color,
                depth: &l.depth,
                alpha: &l.alpha,
            })
            .collect()
    }
}

impl RgbdPanorama {
    pub fn layer_view(&self) -> LayerView<'_> {
        LayerView {
            color: &self.color,
            depth: &self.depth,
            alpha: &self.alpha,
        }
    }
}

/// Raised when the target sits outside the innermost occupied shell, where
/// shell order no longer matches visibility order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderingViolation {
    pub camera_radius: f64,
    pub shell_radius: f64,
}

impl std::fmt::Display for OrderingViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "target camera at radius {:.3} m is not inside the innermost occupied shell ({:.3} m); layer ordering may be wrong",
            self.camera_radius, self.shell_radius
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    /// RGBA, color premultiplied (composited over black).
    pub image: Image,
    pub warning: Option<OrderingViolation>,
}

fn check_ordering(target: &TargetCamera, inner_radius: Option<f64>) -> Option<OrderingViolation> {
    let c = target.center();
    let camera_radius = c.x.hypot(c.y);
    match inner_radius {
        Some(r) if camera_radius >= r => Some(OrderingViolation {
            camera_radius,
            shell_radius: r,
        }),
        _ => None,
    }
}

pub fn render(mdp: &Mdp, target: &TargetCamera, zcfg: &SoftZConfig) -> Result<RenderOutput> {
    mdp.validate()?;
    let image = render_layers(&mdp.layer_views(), &mdp.mapping, target, zcfg)?;
    Ok(RenderOutput {
        image,
        warning: check_ordering(target, mdp.innermost_occupied_radius()),
    })
}

/// Renders a single RGBD panorama as a one-shell stack.
pub fn render_rgbd(pano: &RgbdPanorama, target: &TargetCamera, zcfg: &SoftZConfig) -> Result<RenderOutput> {
    let view = pano.layer_view();
    let occupied = pano.alpha.iter().any(|&a| a > 0.0).then_some(pano.rho_min);
    let image = render_layers(&[view], &pano.mapping, target, zcfg)?;
    Ok(RenderOutput {
        image,
        warning: check_ordering(target, occupied),
    })
}

/// Core forward pass over shells ordered innermost first.
pub fn render_layers(
    layers: &[LayerView<'_>],
    mapping: &PanoMapping,
    target: &TargetCamera,
    zcfg: &SoftZConfig,
) -> Result<Image> {
    target.validate()?;
    let px = mapping.pixel_count();
    for (m, l) in layers.iter().enumerate() {
        if l.alpha.len() != px || l.depth.len() != px || l.color.len() != 3 * px {
            return Err(Error::DimensionMismatch(format!(
                "layer {m} buffers do not match the {}x{} mapping",
                mapping.width, mapping.height
            )));
        }
    }
    let (w, h) = target.size();
    let mut out = vec![[0.0f64; 4]; w * h];
    for layer in layers.iter().rev() {
        let records = splat::splat_records(layer, mapping, target);
        let acc = splat::accumulate(&records, target, zcfg);
        for (q, o) in out.iter_mut().enumerate() {
            let (c, a) = acc.resolved(q, zcfg);
            over_premultiplied(o, [c[0] * a, c[1] * a, c[2] * a, a]);
        }
    }
    let mut image = Image::new(w, h, 4);
    for (q, o) in out.iter().enumerate() {
        for c in 0..4 {
            image.data[4 * q + c] = o[c].clamp(0.0, 1.0);
        }
    }
    Ok(image)
}
