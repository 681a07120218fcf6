use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mdp_core::config::PipelineConfig;
use mdp_core::eval::metrics::{l1, psnr, ssim};
use mdp_core::eval::{
    compute_metrics, raycast_render, render_rig_views, standard_config, standard_rig, Material, Primitive, SyntheticScene,
    Texture, PSNR_CAP,
    STANDARD_VIEW_SIZE,
};
use mdp_core::geometry::{to_cylindrical, unproject_mpi_pixel, Camera, CameraRig, Extrinsics, Intrinsics, PanoMapping};
use mdp_core::mdp::{blend_mdps, build_global_mdp, per_view_mdp, PartitionMode, ShellPartition};
use mdp_core::mpi::Mpi;
use mdp_core::psv::{build_psv_with_neighbors, disparity_ladder};
use mdp_core::raster::Image;
use mdp_core::render::{render, render_sequence, SoftZConfig, TargetCamera};

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    Image::from_fn(w, h, 3, |_, _, _| rng.random_range(0.0..1.0))
}

/// Direct 2D SSIM: weighted moments in every fully covered 11x11 window.
fn ssim_oracle(a: &Image, b: &Image) -> f64 {
    let (r, sigma) = (5i64, 1.5f64);
    let mut wts = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            wts.push(((-(dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = wts.iter().sum();
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut per_channel = 0.0;
    for c in 0..3 {
        let mut sum = 0.0;
        let mut count = 0;
        for cy in r..a.height as i64 - r {
            for cx in r..a.width as i64 - r {
                let mut samples = Vec::new();
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (x, y) = ((cx + dx) as usize, (cy + dy) as usize);
                        samples.push((a.pixel(x, y)[c], b.pixel(x, y)[c]));
                    }
                }
                let mx = samples.iter().zip(&wts).map(|(s, w)| w * s.0).sum::<f64>() / total;
                let my = samples.iter().zip(&wts).map(|(s, w)| w * s.1).sum::<f64>() / total;
                let vx = samples.iter().zip(&wts).map(|(s, w)| w * (s.0 - mx).powi(2)).sum::<f64>() / total;
                let vy = samples.iter().zip(&wts).map(|(s, w)| w * (s.1 - my).powi(2)).sum::<f64>() / total;
                let cov = samples.iter().zip(&wts).map(|(s, w)| w * (s.0 - mx) * (s.1 - my)).sum::<f64>() / total;
                sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        per_channel += sum / count as f64;
    }
    per_channel / 3.0
}

#[test]
fn metrics_match_scalar_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..4 {
        let (w, h) = (rng.random_range(11..30), rng.random_range(11..24));
        let a = random_image(&mut rng, w, h);
        let mut b = a.clone();
        b.data.iter_mut().for_each(|v| *v = (*v + rng.random_range(-0.2..0.2)).clamp(0.0, 1.0));
        let n = (3 * w * h) as f64;
        let l1_ref = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum::<f64>() / n;
        let mse = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n;
        assert!((l1(&a, &b).unwrap() - l1_ref).abs() < 1e-12);
        assert!((psnr(&a, &b).unwrap() - (-10.0 * mse.log10())).abs() < 1e-9);
        let s = ssim(&a, &b).unwrap();
        assert!((s - ssim_oracle(&a, &b)).abs() < 1e-9, "{s} vs {}", ssim_oracle(&a, &b));
        let perfect = compute_metrics(&a, &a).unwrap();
        assert_eq!((perfect.psnr, perfect.l1), (PSNR_CAP, 0.0));
        assert!((perfect.ssim - 1.0).abs() < 1e-12);
    }
}

#[test]
fn ring_views_of_symmetric_scene_are_identical() {
    // solid concentric cylinders tall enough to fill every view
    let cylinder = |radius: f64, color: [f64; 3]| Primitive::Cylinder {
        center: [0.0, 0.0],
        radius,
        z_min: -50.0,
        z_max: 50.0,
        material: Material { color, texture: Texture::Solid },
    };
    let mut scene = SyntheticScene::empty([0.0; 3]);
    scene.primitives.push(cylinder(5.0, [0.3, 0.6, 0.9]));
    let rig = standard_rig(40).unwrap();
    let views = render_rig_views(&scene, &rig);
    assert!(views[0].data.iter().any(|&v| v > 0.0));
    for v in &views[1..] {
        let worst = v.data.iter().zip(&views[0].data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }
}

#[test]
fn psv_against_reference_is_identity() {
    let scene = SyntheticScene::standard();
    let rig = standard_rig(32).unwrap();
    let images = render_rig_views(&scene, &rig);
    let psv = build_psv_with_neighbors(&rig, &images, 3, &[3], 1.0, 8.0, 6).unwrap();
    for l in 0..6 {
        for y in 0..32 {
            for x in 0..32 {
                let s = psv.sample(l, x, y, 0).unwrap();
                let p = images[3].pixel(x, y);
                for c in 0..3 {
                    assert_eq!(s[c], p[c] as f32);
                }
            }
        }
    }
}

/// Narrow camera at the rig center: radius and depth along each ray differ by
/// at most the secant of the half field of view.
fn center_rig(n: usize, hfov: f64) -> CameraRig {
    let k = Intrinsics::from_hfov(hfov, n, n).unwrap();
    let axes = Matrix3::from_columns(&[-Vector3::y(), -Vector3::z(), Vector3::x()]);
    let cam = Camera {
        intrinsics: k,
        extrinsics: Extrinsics::from_center(axes, Vector3::zeros()).unwrap(),
    };
    CameraRig::new(vec![cam; 2], Extrinsics::identity()).unwrap()
}

#[test]
fn one_shell_per_plane_reproduces_mpi() {
    let (n, l) = (12, 6);
    let rig = center_rig(n, 10.0);
    let disp = disparity_ladder(1.0, 8.0, l).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut mpi = Mpi::new(0, n, n, disp.clone());
    mpi.color.iter_mut().for_each(|c| *c = rng.random_range(0.0..1.0));
    mpi.alpha.iter_mut().for_each(|a| *a = rng.random_range(0.05..1.0));
    // shell boundaries halfway between plane disparities
    let half = (disp[1] - disp[0]) / 2.0;
    let part = ShellPartition::new(
        1.0 / (disp[l - 1] + half),
        1.0 / (disp[0] - half),
        l,
        PartitionMode::EquidistantInverseRadius,
    )
    .unwrap();
    let mapping = PanoMapping::new(2048, 64, 0.2).unwrap();
    let pv = per_view_mdp(&rig, &mpi, &mapping, &part, 0.0).unwrap();
    let mdp = blend_mdps(&[pv]).unwrap();
    for y in 0..n {
        for x in 0..n {
            let p = unproject_mpi_pixel(x as f64, y as f64, 1.0, &rig.cameras[0], &rig.rig_center).unwrap();
            let (c, r) = mapping.pixel_index_of(&to_cylindrical(&p)).unwrap();
            let px = r * mapping.width + c;
            for plane in 0..l {
                // shells run inside out, planes back to front
                let shell = &mdp.layers[l - 1 - plane];
                let (color, alpha) = mpi.rgba(plane, x, y);
                assert!((shell.alpha[px] - alpha).abs() < 1e-6);
                for k in 0..3 {
                    assert!((shell.color[3 * px + k] - color[k]).abs() < 1e-5);
                }
            }
        }
    }
}

fn small_cfg() -> PipelineConfig {
    let mut c = standard_config();
    c.psv.layers = 12;
    c.mdp.pano_width = 128;
    c.mdp.pano_height = 64;
    c
}

#[test]
fn sequence_renders_every_target() {
    let scene = SyntheticScene::standard();
    let rig = standard_rig(64).unwrap();
    let cfg = small_cfg();
    let mdp = build_global_mdp(&rig, &render_rig_views(&scene, &rig), &cfg).unwrap();
    let mapping = cfg.mapping().unwrap();
    let targets: Vec<TargetCamera> = (0..4)
        .map(|i| {
            let c = Vector3::new(0.05 * i as f64, 0.0, 0.0);
            TargetCamera::panorama(mapping, Extrinsics::from_center(Matrix3::identity(), c).unwrap())
        })
        .collect();
    let frames = render_sequence(&mdp, &targets, &SoftZConfig::default()).unwrap();
    assert_eq!(frames.len(), 4);
    for (f, t) in frames.iter().zip(&targets) {
        let single = render(&mdp, t, &SoftZConfig::default()).unwrap();
        assert_eq!(f.output, single);
    }
}

/// Rig-center render against the ray-cast panorama. The bound was measured
/// once on this configuration (L1 0.0423) and committed with headroom.
#[test]
fn end_to_end_center_render_matches_oracle() {
    const L1_BOUND: f64 = 0.05;
    let scene = SyntheticScene::standard();
    let rig = standard_rig(STANDARD_VIEW_SIZE).unwrap();
    let cfg = standard_config();
    let mdp = build_global_mdp(&rig, &render_rig_views(&scene, &rig), &cfg).unwrap();
    let target = TargetCamera::panorama(cfg.mapping().unwrap(), Extrinsics::identity());
    let out = render(&mdp, &target, &cfg.soft_z().unwrap()).unwrap();
    assert!(out.warning.is_none());
    let gt = raycast_render(&scene, &target);
    let m = compute_metrics(&out.image, &gt.color).unwrap();
    assert!(m.l1 < L1_BOUND, "L1 {} (bound {L1_BOUND})", m.l1);
}
