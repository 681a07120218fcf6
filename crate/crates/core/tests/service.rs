use std::sync::Arc;

use base64::Engine;
use serde_json::{json, Value};

use mdp_core::geometry::PanoMapping;
use mdp_core::mdp::{Mdp, PartitionMode, ShellPartition};
use mdp_core::pose::{PoseMode, PoseRequest};
use mdp_core::render::{render, SoftZConfig};
use mdp_core::service::{encode_frame, router, FrameEncoding, FrameResponse, MetaResponse, ServiceState};

fn sample_mdp() -> Mdp {
    let mapping = PanoMapping::new(64, 32, 1.0).unwrap();
    let part = ShellPartition::new(1.0, 8.0, 5, PartitionMode::EquidistantRadius).unwrap();
    let mut mdp = Mdp::empty(mapping, part);
    for (s, layer) in mdp.layers.iter_mut().enumerate().skip(1) {
        for p in 0..layer.alpha.len() {
            layer.alpha[p] = if (p + s) % 3 == 0 { 0.9 } else { 0.4 };
            layer.depth[p] = (1.0 + 1.4 * s as f64 + 0.7) as f32;
            layer.color[3 * p..3 * p + 3].copy_from_slice(&[(p % 64) as f32 / 64.0, s as f32 / 5.0, 0.3]);
        }
    }
    mdp
}

async fn start(max_pixels: usize) -> (String, Mdp) {
    let mdp = sample_mdp();
    let state = Arc::new(ServiceState::new(mdp.clone(), SoftZConfig::default(), max_pixels).unwrap());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    (format!("http://{addr}"), mdp)
}

async fn post(client: &reqwest::Client, base: &str, body: &Value) -> (u16, Value) {
    let r = client.post(format!("{base}/frame")).json(body).send().await.unwrap();
    let status = r.status().as_u16();
    (status, r.json().await.unwrap())
}

fn pose_json(frame_id: u64, position: [f64; 3]) -> Value {
    let mut p = PoseRequest::identity(PoseMode::Panorama, 64, 32);
    p.frame_id = frame_id;
    p.position = position;
    serde_json::to_value(p).unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn health_and_meta() {
    let (base, _) = start(10_000).await;
    let client = reqwest::Client::new();
    let health: Value = client.get(format!("{base}/health")).send().await.unwrap().json().await.unwrap();
    assert_eq!(health, json!({"status": "ok"}));
    let meta: MetaResponse = client.get(format!("{base}/meta")).send().await.unwrap().json().await.unwrap();
    assert_eq!(meta.layers, 5);
    assert_eq!(meta.shell_radii.len(), 5);
    assert_eq!((meta.width, meta.height), (64, 32));
    assert!((meta.motion_bound - 2.4).abs() < 1e-12);
    assert_eq!(meta.max_pixels, 10_000);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn identity_frame_matches_offline_render() {
    let (base, mdp) = start(10_000).await;
    let client = reqwest::Client::new();
    let (status, body) = post(&client, &base, &pose_json(7, [0.0; 3])).await;
    assert_eq!(status, 200);
    let frame: FrameResponse = serde_json::from_value(body).unwrap();
    assert_eq!((frame.frame_id, frame.width, frame.height), (7, 64, 32));
    assert_eq!(frame.encoding, FrameEncoding::Png);
    assert!(frame.warning.is_none());
    let bytes = base64::engine::general_purpose::STANDARD.decode(&frame.image).unwrap();
    let target = PoseRequest::identity(PoseMode::Panorama, 64, 32).target(1.0).unwrap();
    let expected = encode_frame(&render(&mdp, &target, &SoftZConfig::default()).unwrap().image, FrameEncoding::Png).unwrap();
    assert_eq!(bytes, expected);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn jpeg_frames_and_ordering_warnings() {
    let (base, _) = start(10_000).await;
    let client = reqwest::Client::new();
    let mut body = pose_json(1, [3.0, 0.0, 0.0]);
    body["encoding"] = json!("jpeg");
    let (status, body) = post(&client, &base, &body).await;
    assert_eq!(status, 200);
    let frame: FrameResponse = serde_json::from_value(body).unwrap();
    assert_eq!(frame.encoding, FrameEncoding::Jpeg);
    assert!(frame.warning.unwrap().contains("innermost"));
    let bytes = base64::engine::general_purpose::STANDARD.decode(&frame.image).unwrap();
    assert_eq!(&bytes[..2], &[0xff, 0xd8]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn request_errors() {
    let (base, _) = start(10_000).await;
    let client = reqwest::Client::new();
    let raw = client
        .post(format!("{base}/frame"))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(raw.status().as_u16(), 400);

    let mut bad = pose_json(1, [0.0; 3]);
    bad["orientation"] = json!([1.0, 0.5, 0.0, 0.0]);
    let (status, body) = post(&client, &base, &bad).await;
    assert_eq!(status, 400);
    assert!(body["error"].as_str().unwrap().contains("quaternion"));

    let mut unknown = pose_json(1, [0.0; 3]);
    unknown["colour"] = json!("red");
    assert_eq!(post(&client, &base, &unknown).await.0, 400);

    let mut missing = pose_json(1, [0.0; 3]);
    missing.as_object_mut().unwrap().remove("position");
    assert_eq!(post(&client, &base, &missing).await.0, 400);

    let mut big = pose_json(1, [0.0; 3]);
    big["width"] = json!(200);
    big["height"] = json!(100);
    let (status, body) = post(&client, &base, &big).await;
    assert_eq!(status, 413);
    assert!(body["error"].as_str().unwrap().contains("limit"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stale_ids_within_a_session_are_rejected() {
    let (base, _) = start(10_000).await;
    let client = reqwest::Client::new();
    let with_session = |id: u64| {
        let mut b = pose_json(id, [0.0; 3]);
        b["session"] = json!("viewer-1");
        b
    };
    assert_eq!(post(&client, &base, &with_session(5)).await.0, 200);
    assert_eq!(post(&client, &base, &with_session(5)).await.0, 409);
    assert_eq!(post(&client, &base, &with_session(3)).await.0, 409);
    assert_eq!(post(&client, &base, &with_session(6)).await.0, 200);
    // other sessions and session-less requests are independent
    let mut other = with_session(1);
    other["session"] = json!("viewer-2");
    assert_eq!(post(&client, &base, &other).await.0, 200);
    assert_eq!(post(&client, &base, &pose_json(1, [0.0; 3])).await.0, 200);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_frames_keep_their_ids() {
    let (base, _) = start(10_000).await;
    let client = reqwest::Client::new();
    let (pa, pb) = (pose_json(11, [0.1, 0.0, 0.0]), pose_json(12, [0.0, 0.1, 0.0]));
    let a = post(&client, &base, &pa);
    let b = post(&client, &base, &pb);
    let health = client.get(format!("{base}/health")).send();
    let ((sa, ba), (sb, bb), h) = tokio::join!(a, b, health);
    assert_eq!((sa, sb), (200, 200));
    assert_eq!(ba["frame_id"], 11);
    assert_eq!(bb["frame_id"], 12);
    assert_eq!(h.unwrap().status().as_u16(), 200);
}
