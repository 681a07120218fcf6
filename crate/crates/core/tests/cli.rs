use std::path::Path;
use std::process::{Command, Output};

use mdp_core::geometry::PanoMapping;
use mdp_core::mdp::container::{mdp_read, mdp_write};
use mdp_core::mdp::{Mdp, PartitionMode, ShellPartition};
use mdp_core::pose::{PoseMode, PoseRequest};
use mdp_core::render::{render, SoftZConfig};
use mdp_core::service::{encode_frame, FrameEncoding};

fn mdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdp"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a small synthetic dataset and shrinks its config for speed.
fn synth(dir: &Path) {
    let o = mdp(&["synth", s(dir), "--view-size", "64"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = dir.join("config.toml");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("pano_width = 640", "pano_width = 128")
        .replace("pano_height = 320", "pano_height = 64")
        .replace("layers = 32", "layers = 8");
    std::fs::write(&cfg, text).unwrap();
}

#[test]
fn build_render_and_info() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let out = d.join("scene.mdp");
    let o = mdp(&["build", s(&d.join("rig.toml")), s(&d.join("images")), s(&d.join("config.toml")), s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "Dimension 128 x 64 x 5 x 5 | Storage 0.001GB (819200 bytes)");
    let loaded = mdp_read(&out).unwrap();
    assert_eq!(loaded.payload_bytes(), 128 * 64 * 5 * 5 * 4);
    assert_eq!(std::fs::metadata(&out).unwrap().len(), mdp_core::mdp::container::file_len(128, 64, 5));

    let frames = d.join("orbit");
    let o = mdp(&["render", s(&out), "--orbit", "8", "--orbit-radius", "0.05", "--out-dir", s(&frames)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_dir(&frames).unwrap().count(), 8);

    // a single rig-center pose is the offline render, byte for byte
    let single = d.join("single");
    let o = mdp(&["render", s(&out), "--poses", s(&d.join("pose.json")), "--out-dir", s(&single)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let written = std::fs::read(single.join("frame_0000.png")).unwrap();
    let target = PoseRequest::identity(PoseMode::Panorama, 640, 320).target(1.0).unwrap();
    let expected = encode_frame(&render(&loaded, &target, &SoftZConfig::default()).unwrap().image, FrameEncoding::Png).unwrap();
    assert_eq!(written, expected);

    // deterministic: a second build is byte-identical
    let again = d.join("again.mdp");
    let o = mdp(&["build", s(&d.join("rig.toml")), s(&d.join("images")), s(&d.join("config.toml")), s(&again)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());

    let o = mdp(&["info", s(&out)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 6);
}

#[test]
fn storage_line_for_full_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.mdp");
    let mapping = PanoMapping::new(2560, 640, 1.0).unwrap();
    let part = ShellPartition::new(1.0, 10.0, 5, PartitionMode::EquidistantRadius).unwrap();
    mdp_write(&Mdp::empty(mapping, part), &path).unwrap();
    let o = mdp(&["info", s(&path)]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("Dimension 2560 x 640 x 5 x 5 | Storage 0.164GB (163840000 bytes)"));
}

#[test]
fn ordering_violation_is_a_note_not_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mdp");
    let mapping = PanoMapping::new(32, 16, 1.0).unwrap();
    let part = ShellPartition::new(1.0, 6.0, 2, PartitionMode::EquidistantRadius).unwrap();
    let mut m = Mdp::empty(mapping, part);
    m.layers[0].alpha.iter_mut().for_each(|a| *a = 1.0);
    m.layers[0].depth.iter_mut().for_each(|d| *d = 2.0);
    mdp_write(&m, &path).unwrap();
    let pose = dir.path().join("far.json");
    let mut p = PoseRequest::identity(PoseMode::Perspective, 16, 16);
    p.position = [1.5, 0.0, 0.0];
    std::fs::write(&pose, serde_json::to_string(&[p]).unwrap()).unwrap();
    let o = mdp(&["render", s(&path), "--poses", s(&pose), "--out-dir", s(&dir.path().join("f"))]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("note: frame 0"));
}

#[test]
fn exit_codes_name_the_failure() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let build = |rig: &Path, images: &Path, cfg: &Path| {
        mdp(&["build", s(rig), s(images), s(cfg), s(&d.join("o.mdp"))])
    };
    let (rig, images, cfg) = (d.join("rig.toml"), d.join("images"), d.join("config.toml"));

    let o = build(&d.join("missing.toml"), &images, &cfg);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error: load inputs: invalid calibration"));

    std::fs::rename(images.join("cam05.png"), d.join("moved.png")).unwrap();
    let o = build(&rig, &images, &cfg);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("cam05.png"));
    std::fs::rename(d.join("moved.png"), images.join("cam05.png")).unwrap();

    std::fs::write(d.join("bad.toml"), "version = 1\n[psv]\nlayers = 0\n").unwrap();
    let o = build(&rig, &images, &d.join("bad.toml"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: config:"));

    let o = mdp(&["render", s(&rig), "--orbit", "2", "--out-dir", s(&d.join("x"))]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).starts_with("error: load mdp:"));

    let o = mdp(&["render", s(&rig)]);
    assert_eq!(o.status.code(), Some(2));
}
