use std::ffi::{CStr, CString};
use std::ptr;

use mdp_core::geometry::PanoMapping;
use mdp_core::mdp::container::encode;
use mdp_core::mdp::{Mdp, PartitionMode, ShellPartition};
use mdp_core::pose::{PoseMode, PoseRequest};
use mdp_core::render::{render, SoftZConfig};
use mdp_ffi::*;

fn sample_mdp() -> Mdp {
    mdp_of_size(32, 16)
}

fn mdp_of_size(w: usize, h: usize) -> Mdp {
    let mapping = PanoMapping::new(w, h, 1.0).unwrap();
    let part = ShellPartition::new(1.0, 6.0, 3, PartitionMode::EquidistantRadius).unwrap();
    let mut mdp = Mdp::empty(mapping, part);
    let layer = &mut mdp.layers[1];
    for i in 0..layer.alpha.len() {
        layer.alpha[i] = 1.0;
        layer.depth[i] = 3.0;
        layer.color[3 * i..3 * i + 3].copy_from_slice(&[(i % w) as f32 / w as f32, 0.5, 0.25]);
    }
    mdp
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(mdp_last_error_message()) }.to_string_lossy().into_owned()
}

fn open(mdp: &Mdp) -> *mut MdpHandle {
    let bytes = encode(mdp).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { mdp_open_bytes(bytes.as_ptr(), bytes.len(), &mut h) }, MdpStatus::Ok);
    assert!(!h.is_null());
    h
}

fn pano_pose(w: usize, h: usize) -> MdpPose {
    MdpPose {
        position: [0.0; 3],
        orientation: [1.0, 0.0, 0.0, 0.0],
        mode: MdpTargetMode::Panorama as u32,
        width: w,
        height: h,
        hfov_deg: 0.0,
        v_fov_slope: 0.0,
    }
}

#[test]
fn info_and_shells() {
    let h = open(&sample_mdp());
    let mut info = MdpInfo::default();
    assert_eq!(unsafe { mdp_info(h, &mut info) }, MdpStatus::Ok);
    assert_eq!((info.width, info.height, info.shells), (32, 16, 3));
    assert_eq!(info.payload_bytes, 32 * 16 * 3 * 5 * 4);
    assert!((info.motion_bound - 1.0 - 5.0 / 3.0).abs() < 1e-12);
    let (mut lo, mut hi) = (0.0, 0.0);
    assert_eq!(unsafe { mdp_shell_range(h, 2, &mut lo, &mut hi) }, MdpStatus::Ok);
    assert!((hi - 6.0).abs() < 1e-12 && lo < hi);
    assert_eq!(unsafe { mdp_shell_range(h, 3, &mut lo, &mut hi) }, MdpStatus::InvalidInput);
    assert!(last_error().contains("out of range"));
    unsafe { mdp_close(h) };
}

#[test]
fn render_matches_core() {
    let mdp = sample_mdp();
    let h = open(&mdp);
    let mut pose = pano_pose(40, 20);
    pose.position = [0.2, -0.1, 0.05];
    let mut buf = vec![0f32; 40 * 20 * 4];
    let mut warn = -1;
    assert_eq!(unsafe { mdp_render(h, &pose, buf.as_mut_ptr(), buf.len(), &mut warn) }, MdpStatus::Ok);
    assert_eq!(warn, 0);
    let req = PoseRequest {
        position: pose.position,
        ..PoseRequest::identity(PoseMode::Panorama, 40, 20)
    };
    let expected = render(&mdp, &req.target(1.0).unwrap(), &SoftZConfig::default()).unwrap();
    assert!(buf.iter().zip(&expected.image.data).all(|(a, b)| *a == *b as f32));

    pose.position = [3.0, 0.0, 0.0];
    assert_eq!(unsafe { mdp_render(h, &pose, buf.as_mut_ptr(), buf.len(), &mut warn) }, MdpStatus::Ok);
    assert_eq!(warn, 1);
    unsafe { mdp_close(h) };
}

#[test]
fn perspective_and_soft_z() {
    let h = open(&mdp_of_size(128, 64));
    let mut pose = pano_pose(16, 12);
    pose.mode = MdpTargetMode::Perspective as u32;
    pose.hfov_deg = 70.0;
    let mut buf = vec![0f32; 16 * 12 * 4];
    assert_eq!(unsafe { mdp_set_soft_z(h, 200.0, 1e-9) }, MdpStatus::Ok);
    assert_eq!(unsafe { mdp_render(h, &pose, buf.as_mut_ptr(), buf.len(), ptr::null_mut()) }, MdpStatus::Ok);
    assert!(buf.chunks(4).all(|p| (p[3] - 1.0).abs() < 1e-5));
    assert_eq!(unsafe { mdp_set_soft_z(h, -1.0, 1e-9) }, MdpStatus::InvalidInput);
    unsafe { mdp_close(h) };
}

#[test]
fn error_codes() {
    let h = open(&sample_mdp());
    let mut buf = vec![0f32; 8];
    let pose = pano_pose(4, 4);
    assert_eq!(unsafe { mdp_render(h, &pose, buf.as_mut_ptr(), buf.len(), ptr::null_mut()) }, MdpStatus::BufferTooSmall);
    let mut bad = pano_pose(2, 1);
    bad.orientation = [1.0, 0.1, 0.0, 0.0];
    assert_eq!(unsafe { mdp_render(h, &bad, buf.as_mut_ptr(), buf.len(), ptr::null_mut()) }, MdpStatus::InvalidInput);
    assert!(last_error().contains("quaternion"));
    bad = pano_pose(2, 1);
    bad.mode = 7;
    assert_eq!(unsafe { mdp_render(h, &bad, buf.as_mut_ptr(), buf.len(), ptr::null_mut()) }, MdpStatus::InvalidInput);
    assert_eq!(unsafe { mdp_render(h, ptr::null(), buf.as_mut_ptr(), buf.len(), ptr::null_mut()) }, MdpStatus::NullPointer);
    assert_eq!(unsafe { mdp_info(ptr::null(), ptr::null_mut()) }, MdpStatus::NullPointer);
    unsafe { mdp_close(h) };
    unsafe { mdp_close(ptr::null_mut()) };

    let mut bytes = encode(&sample_mdp()).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { mdp_open_bytes(bytes.as_ptr(), bytes.len(), &mut out) }, MdpStatus::Format);
    assert!(last_error().contains("checksum"));
    assert!(out.is_null());

    let missing = CString::new("/nonexistent/file.mdp").unwrap();
    assert_eq!(unsafe { mdp_open(missing.as_ptr(), &mut out) }, MdpStatus::Io);
    assert_eq!(unsafe { mdp_open(ptr::null(), &mut out) }, MdpStatus::NullPointer);
}

#[test]
fn open_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.mdp");
    mdp_core::mdp::container::mdp_write(&sample_mdp(), &path).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { mdp_open(c.as_ptr(), &mut h) }, MdpStatus::Ok);
    assert_eq!(last_error(), "");
    unsafe { mdp_close(h) };
    let v = unsafe { CStr::from_ptr(mdp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"mdp.h\"\n\
         int main(void) {\n\
           MdpHandle *h = 0;\n\
           MdpInfo info;\n\
           MdpPose pose = {{0,0,0},{1,0,0,0}, MDP_TARGET_MODE_PANORAMA, 64, 32, 0.0, 0.0};\n\
           float px[64*32*4];\n\
           if (mdp_open(\"x.mdp\", &h) != MDP_STATUS_OK) return 1;\n\
           mdp_info(h, &info);\n\
           mdp_render(h, &pose, px, sizeof px / sizeof px[0], 0);\n\
           mdp_close(h);\n\
           return 0;\n\
         }\n",
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
}
