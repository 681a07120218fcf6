use rayon::prelude::*;

use super::ShellPartition;
use crate::error::Result;
use crate::geometry::{to_cylindrical, unproject_mpi_pixel, Camera, CylCoord, Extrinsics};
use crate::mpi::Mpi;

/// An MPI sample lifted into rig-centered cylindrical coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CylPoint {
    pub coord: CylCoord,
    pub color: [f32; 3],
    pub alpha: f32,
    /// Source MPI plane; higher index is nearer to the source camera.
    pub layer: u32,
    pub view: u32,
    /// Cosine between the pixel's viewing ray and the camera's optical axis.
    pub weight: f32,
}

pub type CylPointCloud = Vec<CylPoint>;

pub const DEFAULT_ALPHA_CULL: f64 = 1e-4;

/// Lifts every MPI sample with `alpha > alpha_cull` into a cylindrical point.
///
/// Points come out layer-major, then row-major within a plane.
pub fn mpi_to_cyl_points(
    mpi: &Mpi,
    cam: &Camera,
    rig_center: &Extrinsics,
    alpha_cull: f64,
) -> Result<CylPointCloud> {
    let per_layer: Vec<Result<Vec<CylPoint>>> = (0..mpi.layer_count())
        .into_par_iter()
        .map(|l| {
            let disparity = mpi.disparities[l];
            let mut out = Vec::new();
            for y in 0..mpi.height {
                for x in 0..mpi.width {
                    let (color, alpha) = mpi.rgba(l, x, y);
                    if !(alpha as f64 > alpha_cull) {
                        continue;
                    }
                    let (xs, ys) = (x as f64, y as f64);
                    let p = unproject_mpi_pixel(xs, ys, disparity, cam, rig_center)?;
                    let weight = 1.0 / cam.intrinsics.ray(xs, ys).norm();
                    out.push(CylPoint {
                        coord: to_cylindrical(&p),
                        color,
                        alpha,
                        layer: l as u32,
                        view: mpi.view as u32,
                        weight: weight as f32,
                    });
                }
            }
            Ok(out)
        })
        .collect();
    let mut cloud = Vec::new();
    for layer in per_layer {
        cloud.extend(layer?);
    }
    Ok(cloud)
}

/// Splits a cloud into per-shell clouds, preserving point order within each.
pub fn bin_points(cloud: &[CylPoint], partition: &ShellPartition) -> Vec<CylPointCloud> {
    let mut bins = vec![Vec::new(); partition.shell_count()];
    for p in cloud {
        bins[partition.bin_of(p.coord.rho)].push(*p);
    }
    bins
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraRig, Intrinsics};
    use crate::mdp::PartitionMode;

    #[test]
    fn principal_point_of_forward_camera() {
        let rig = CameraRig::ring(4, 0.0, 90.0, 5, 5).unwrap();
        let mut mpi = Mpi::new(0, 5, 5, vec![0.25, 0.5]);
        let i = mpi.index(0, 2, 2);
        mpi.alpha[i] = 1.0;
        let pts = mpi_to_cyl_points(&mpi, &rig.cameras[0], &Extrinsics::identity(), 0.0).unwrap();
        assert_eq!(pts.len(), 1);
        let p = pts[0];
        assert!((p.coord.rho - 4.0).abs() < 1e-12);
        assert!(p.coord.phi.abs() < 1e-12 && p.coord.z.abs() < 1e-12);
        assert_eq!(p.weight, 1.0);
    }

    #[test]
    fn culling_counts() {
        let cam = Camera {
            intrinsics: Intrinsics::from_hfov(90.0, 4, 3).unwrap(),
            extrinsics: Extrinsics::identity(),
        };
        let mut mpi = Mpi::new(0, 4, 3, vec![0.1, 0.2, 0.3]);
        for (i, a) in mpi.alpha.iter_mut().enumerate() {
            *a = if i % 5 == 0 { 0.0 } else { 0.5 };
        }
        let zeros = mpi.alpha.iter().filter(|&&a| a == 0.0).count();
        let pts = mpi_to_cyl_points(&mpi, &cam, &Extrinsics::identity(), 0.0).unwrap();
        assert_eq!(pts.len(), 4 * 3 * 3 - zeros);
        mpi.alpha.iter_mut().for_each(|a| *a = 0.0);
        assert!(mpi_to_cyl_points(&mpi, &cam, &Extrinsics::identity(), 0.0).unwrap().is_empty());
    }

    #[test]
    fn binning_is_a_partition() {
        let part = ShellPartition::new(1.0, 5.0, 4, PartitionMode::EquidistantRadius).unwrap();
        let cloud: Vec<CylPoint> = [0.5, 1.0, 2.0, 2.5, 3.0, 4.99, 5.0, 9.0]
            .iter()
            .map(|&rho| CylPoint {
                coord: CylCoord { rho, phi: 0.0, z: 0.0 },
                color: [0.0; 3],
                alpha: 1.0,
                layer: 0,
                view: 0,
                weight: 1.0,
            })
            .collect();
        let bins = bin_points(&cloud, &part);
        let radii: Vec<Vec<f64>> = bins.iter().map(|b| b.iter().map(|p| p.coord.rho).collect()).collect();
        assert_eq!(radii, vec![vec![0.5, 1.0], vec![2.0, 2.5], vec![3.0], vec![4.99, 5.0, 9.0]]);
    }
}
