//! Plane-sweep volumes: neighbor views warped onto a ladder of fronto-parallel
//! planes of the reference camera.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Camera, CameraRig};
use crate::raster::Image;

/// Warped neighbor colors for one reference view.
///
/// Layer 0 is the farthest plane; disparity increases with the layer index so
/// that iterating layers in order walks back to front.
#[derive(Clone, Debug)]
pub struct Psv {
    pub ref_view: usize,
    pub neighbors: Vec<usize>,
    /// Inverse depth (1/m) of each plane, strictly increasing.
    pub disparities: Vec<f64>,
    pub width: usize,
    pub height: usize,
    /// The reference image itself, which is the identity warp at every plane.
    pub reference: Image,
    /// `[layer][y][x][neighbor][rgb]`
    pub volume: Vec<f32>,
    /// `[layer][y][x][neighbor]`
    pub validity: Vec<bool>,
}

impl Psv {
    pub fn layer_count(&self) -> usize {
        self.disparities.len()
    }

    pub fn neighbor_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn depth(&self, layer: usize) -> f64 {
        1.0 / self.disparities[layer]
    }

    #[inline]
    fn sample_index(&self, layer: usize, x: usize, y: usize) -> usize {
        ((layer * self.height + y) * self.width + x) * self.neighbors.len()
    }

    /// Warped color of neighbor slot `n`, or `None` when the warp left its image.
    #[inline]
    pub fn sample(&self, layer: usize, x: usize, y: usize, n: usize) -> Option<[f32; 3]> {
        let i = self.sample_index(layer, x, y) + n;
        if self.validity[i] {
            Some([self.volume[3 * i], self.volume[3 * i + 1], self.volume[3 * i + 2]])
        } else {
            None
        }
    }
}

/// Planes sampled linearly in disparity from `1/far` (layer 0) to `1/near`.
pub fn disparity_ladder(near: f64, far: f64, layers: usize) -> Result<Vec<f64>> {
    if !(near > 0.0 && far > near) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < near < far, got near={near} far={far}"
        )));
    }
    if layers < 2 {
        return Err(Error::InvalidArgument("a plane sweep needs at least 2 layers".into()));
    }
    let (lo, hi) = (1.0 / far, 1.0 / near);
    Ok((0..layers)
        .map(|l| lo + (hi - lo) * l as f64 / (layers - 1) as f64)
        .collect())
}

/// The `n` cameras whose optical axes are angularly closest to `view`'s.
/// Ties (within 1e-9 rad) are broken by ascending camera index.
pub fn nearest_neighbors(rig: &CameraRig, view: usize, n: usize) -> Result<Vec<usize>> {
    let k = rig.len();
    if view >= k {
        return Err(Error::InvalidArgument(format!("view {view} out of range (k={k})")));
    }
    if n >= k {
        return Err(Error::InvalidArgument(format!(
            "requested {n} neighbors from a {k}-camera rig"
        )));
    }
    let axis = rig.cameras[view].extrinsics.optical_axis();
    let mut ranked: Vec<(i64, usize)> = rig
        .cameras
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != view)
        .map(|(i, c)| {
            let angle = axis.dot(&c.extrinsics.optical_axis()).clamp(-1.0, 1.0).acos();
            ((angle * 1e9).round() as i64, i)
        })
        .collect();
    ranked.sort();
    Ok(ranked.into_iter().take(n).map(|(_, i)| i).collect())
}

/// Homography taking reference pixels to neighbor pixels for the plane `z_ref = 1/disparity`.
pub fn plane_homography(reference: &Camera, neighbor: &Camera, disparity: f64) -> Option<Matrix3<f64>> {
    let r_ref = reference.extrinsics.rotation;
    let rel_rot = neighbor.extrinsics.rotation * r_ref.transpose();
    let rel_t = neighbor.extrinsics.translation - rel_rot * reference.extrinsics.translation;
    let normal = Vector3::new(0.0, 0.0, 1.0);
    let m = rel_rot + rel_t * normal.transpose() * disparity;
    if m.determinant().abs() < 1e-12 {
        return None;
    }
    Some(neighbor.intrinsics.matrix() * m * reference.intrinsics.inverse_matrix())
}

pub fn build_psv(
    rig: &CameraRig,
    images: &[Image],
    view: usize,
    near: f64,
    far: f64,
    layer_count: usize,
    neighbor_count: usize,
) -> Result<Psv> {
    if neighbor_count == 0 {
        return Err(Error::InvalidArgument("need at least one neighbor".into()));
    }
    let neighbors = nearest_neighbors(rig, view, neighbor_count)?;
    build_psv_with_neighbors(rig, images, view, &neighbors, near, far, layer_count)
}

/// Plane sweep against an explicit neighbor list (which may include `view` itself).
pub fn build_psv_with_neighbors(
    rig: &CameraRig,
    images: &[Image],
    view: usize,
    neighbors: &[usize],
    near: f64,
    far: f64,
    layer_count: usize,
) -> Result<Psv> {
    if images.len() != rig.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} images for a {}-camera rig",
            images.len(),
            rig.len()
        )));
    }
    for (i, (img, cam)) in images.iter().zip(&rig.cameras).enumerate() {
        if img.width != cam.intrinsics.width || img.height != cam.intrinsics.height || img.channels < 3 {
            return Err(Error::DimensionMismatch(format!(
                "image {i} is {}x{}x{}, camera expects {}x{} RGB",
                img.width, img.height, img.channels, cam.intrinsics.width, cam.intrinsics.height
            )));
        }
    }
    let disparities = disparity_ladder(near, far, layer_count)?;
    let reference = &rig.cameras[view];
    let (w, h) = (reference.intrinsics.width, reference.intrinsics.height);
    let n = neighbors.len();

    let homographies = disparities
        .iter()
        .enumerate()
        .map(|(layer, &disp)| {
            neighbors
                .iter()
                .map(|&nb| {
                    plane_homography(reference, &rig.cameras[nb], disp)
                        .ok_or(Error::DegenerateHomography { layer, neighbor: nb })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let layers: Vec<(Vec<f32>, Vec<bool>)> = homographies
        .par_iter()
        .map(|hs| {
            let mut colors = vec![0f32; w * h * n * 3];
            let mut valid = vec![false; w * h * n];
            let mut rgb = [0.0; 3];
            for y in 0..h {
                for x in 0..w {
                    let p = Vector3::new(x as f64, y as f64, 1.0);
                    for (slot, (hm, &nb)) in hs.iter().zip(neighbors).enumerate() {
                        let q = hm * p;
                        if q.z <= 0.0 {
                            continue;
                        }
                        let img = &images[nb];
                        let mut px = [0.0; 4];
                        if img.sample_bilinear(q.x / q.z, q.y / q.z, &mut px[..img.channels]) {
                            rgb.copy_from_slice(&px[..3]);
                            let i = (y * w + x) * n + slot;
                            valid[i] = true;
                            for c in 0..3 {
                                colors[3 * i + c] = rgb[c] as f32;
                            }
                        }
                    }
                }
            }
            (colors, valid)
        })
        .collect();

    let mut volume = Vec::with_capacity(layer_count * w * h * n * 3);
    let mut validity = Vec::with_capacity(layer_count * w * h * n);
    for (c, v) in layers {
        volume.extend_from_slice(&c);
        validity.extend_from_slice(&v);
    }
    Ok(Psv {
        ref_view: view,
        neighbors: neighbors.to_vec(),
        disparities,
        width: w,
        height: h,
        reference: images[view].to_rgb(),
        volume,
        validity,
    })
}
