//! Pose-in / frame-out HTTP service.
//!
//! * `GET /health` returns `{"status": "ok"}` and never waits on rendering.
//! * `GET /meta` returns [`MetaResponse`].
//! * `POST /frame` takes a [`PoseRequest`] and returns a [`FrameResponse`].
//!
//! Errors are `{"error": "..."}` with status 400 (malformed request), 409 (stale
//! frame id within a session), 413 (resolution above the configured limit) or
//! 500. Frame ids are tracked per `session`; a session never renders an id
//! that is not greater than the latest one it has accepted. Requests without
//! a session are rendered unconditionally.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::pose::PoseRequest;
use crate::raster::Image;
use crate::render::{render, SoftZConfig};

pub const DEFAULT_MAX_PIXELS: usize = 4096 * 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FrameEncoding {
    #[default]
    Png,
    Jpeg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellInfo {
    pub index: usize,
    pub rho_min: f64,
    pub rho_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaResponse {
    pub width: usize,
    pub height: usize,
    pub layers: usize,
    pub v_fov_slope: f64,
    pub partition: crate::mdp::PartitionMode,
    /// Inner radius of each shell, meters.
    pub shell_radii: Vec<f64>,
    pub shells: Vec<ShellInfo>,
    /// Largest distance from the rig axis the viewer should move: the inner
    /// radius of the innermost occupied shell.
    pub motion_bound: f64,
    pub max_pixels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameResponse {
    pub frame_id: u64,
    pub width: usize,
    pub height: usize,
    pub encoding: FrameEncoding,
    /// Base64 encoded image bytes.
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub render_ms: f64,
}

/// A pose plus an optional `encoding` field. Parsed in two steps because
/// serde's `flatten` would silently accept unknown pose fields.
fn parse_frame_request(body: &[u8]) -> std::result::Result<(PoseRequest, FrameEncoding), serde_json::Error> {
    let mut value: serde_json::Value = serde_json::from_slice(body)?;
    let encoding = match value.as_object_mut().and_then(|o| o.remove("encoding")) {
        Some(e) => serde_json::from_value(e)?,
        None => FrameEncoding::default(),
    };
    Ok((serde_json::from_value(value)?, encoding))
}

pub struct ServiceState {
    mdp: Mdp,
    zcfg: SoftZConfig,
    max_pixels: usize,
    latest: Mutex<HashMap<String, u64>>,
}

impl ServiceState {
    pub fn new(mdp: Mdp, zcfg: SoftZConfig, max_pixels: usize) -> Result<Self> {
        mdp.validate()?;
        Ok(ServiceState {
            mdp,
            zcfg,
            max_pixels,
            latest: Mutex::new(HashMap::new()),
        })
    }

    pub fn meta(&self) -> MetaResponse {
        let p = &self.mdp.partition;
        let shells: Vec<ShellInfo> = (0..p.shell_count())
            .map(|m| {
                let (lo, hi) = p.range(m);
                ShellInfo {
                    index: m,
                    rho_min: lo,
                    rho_max: hi,
                }
            })
            .collect();
        MetaResponse {
            width: self.mdp.mapping.width,
            height: self.mdp.mapping.height,
            layers: self.mdp.shell_count(),
            v_fov_slope: self.mdp.mapping.v_fov_slope,
            partition: p.mode(),
            shell_radii: shells.iter().map(|s| s.rho_min).collect(),
            shells,
            motion_bound: self.mdp.innermost_occupied_radius().unwrap_or(p.rho_min()),
            max_pixels: self.max_pixels,
        }
    }

    /// Claims `id` for `session`; false when it is not newer than the latest claim.
    fn claim(&self, session: &str, id: u64) -> bool {
        let mut latest = self.latest.lock().expect("frame id table poisoned");
        match latest.get(session) {
            Some(&prev) if id <= prev => false,
            _ => {
                latest.insert(session.to_string(), id);
                true
            }
        }
    }
}

/// Frame bytes exactly as `mdp render` writes them for PNG output.
pub fn encode_frame(image: &Image, encoding: FrameEncoding) -> Result<Vec<u8>> {
    let rgb = image.to_rgb();
    match encoding {
        FrameEncoding::Png => rgb.encode_png(),
        FrameEncoding::Jpeg => rgb.encode_jpeg(85),
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            crate::ErrorKind::InvalidInput => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn meta(State(state): State<Arc<ServiceState>>) -> Json<MetaResponse> {
    Json(state.meta())
}

async fn frame(State(state): State<Arc<ServiceState>>, body: Bytes) -> Result<Json<FrameResponse>, ApiError> {
    let (pose, encoding) = parse_frame_request(&body)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("malformed pose request: {e}")))?;
    let target = pose
        .target(state.mdp.mapping.v_fov_slope)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let pixels = pose.width.saturating_mul(pose.height);
    if pixels > state.max_pixels {
        return Err(ApiError(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("{}x{} exceeds the {} pixel limit", pose.width, pose.height, state.max_pixels),
        ));
    }
    if let Some(session) = &pose.session {
        if !state.claim(session, pose.frame_id) {
            return Err(ApiError(
                StatusCode::CONFLICT,
                format!("stale frame id {} for session {session}", pose.frame_id),
            ));
        }
    }
    let st = state.clone();
    let (bytes, warning, ms) = tokio::task::spawn_blocking(move || -> Result<_> {
        let start = Instant::now();
        let out = render(&st.mdp, &target, &st.zcfg)?;
        let bytes = encode_frame(&out.image, encoding)?;
        Ok((bytes, out.warning, start.elapsed().as_secs_f64() * 1e3))
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, format!("render task failed: {e}")))??;
    if let Some(w) = &warning {
        log::warn!("frame {}: {w}", pose.frame_id);
    }
    Ok(Json(FrameResponse {
        frame_id: pose.frame_id,
        width: pose.width,
        height: pose.height,
        encoding,
        image: base64::engine::general_purpose::STANDARD.encode(bytes),
        warning: warning.map(|w| w.to_string()),
        render_ms: ms,
    }))
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/meta", get(meta))
        .route("/frame", post(frame))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<ServiceState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
