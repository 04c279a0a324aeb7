use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::multipart::MultipartRejection;
use axum::extract::rejection::BytesRejection;
use axum::extract::{Multipart, Path as UrlPath, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use base64::Engine;
use cinema3d_core::assets::{self, AssetBundle};
use cinema3d_core::camera::{Camera, Intrinsics};
use cinema3d_core::grid::{FlowField, MaskImage};
use cinema3d_core::motion::HintsDocument;
use cinema3d_core::pipeline::config::{DEFAULT_AMPLITUDE, DEFAULT_FOV_DEG, DEFAULT_FRAMES};
use cinema3d_core::pipeline::{make_trajectory, motion_from_hints, pose_at_phase, DepthStats, Preset};
use cinema3d_core::renderer::{render_view, RenderConfig, SplatMode};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::{content_hash, AppState, Job, Session};

pub const CONTENT_HASH_HEADER: &str = "x-content-hash";

type Shared = State<Arc<AppState>>;

fn parse_json<T: serde::de::DeserializeOwned>(body: Result<Bytes, BytesRejection>) -> Result<T, ApiError> {
    let body = body.map_err(|e| ApiError::from_status(e.status(), e.body_text()))?;
    serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

/// Runs CPU-heavy work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

pub async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct SessionCreated {
    pub id: String,
    pub width: usize,
    pub height: usize,
}

/// `multipart/form-data` with `image` and `depth` files, plus optional
/// `depth_scale` (16-bit PNG depth only) and `fov_deg` text fields.
pub async fn create_session(
    State(state): Shared,
    multipart: Result<Multipart, MultipartRejection>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let mut multipart = multipart.map_err(|e| ApiError::from_status(e.status(), e.body_text()))?;
    let (mut image, mut depth) = (None, None);
    let (mut depth_scale, mut fov_deg) = (1.0f32, DEFAULT_FOV_DEG);
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::from_status(e.status(), e.body_text()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let data = field
            .bytes()
            .await
            .map_err(|e| ApiError::from_status(e.status(), e.body_text()))?;
        let number = |what: &str| -> Result<f64, ApiError> {
            std::str::from_utf8(&data)
                .ok()
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| ApiError::bad_request(format!("{what} must be a positive number")))
        };
        match name.as_str() {
            "image" => image = Some(data),
            "depth" => depth = Some(data),
            "depth_scale" => depth_scale = number("depth_scale")? as f32,
            "fov_deg" => fov_deg = number("fov_deg")?,
            other => return Err(ApiError::bad_request(format!("unexpected form field \"{other}\""))),
        }
    }
    let image = image.ok_or_else(|| ApiError::bad_request("missing form field \"image\""))?;
    let depth = depth.ok_or_else(|| ApiError::bad_request("missing form field \"depth\""))?;
    if !(fov_deg < 180.0) {
        return Err(ApiError::bad_request("fov_deg must be below 180"));
    }

    let session = blocking(move || {
        let color = assets::decode_color(&image)?;
        let depth = assets::decode_depth(&depth, depth_scale)?;
        let bundle = AssetBundle::new(color, depth, None, None)?;
        let (w, h) = bundle.dims();
        Ok((bundle.color, bundle.depth, Intrinsics::from_fov(w, h, fov_deg)))
    })
    .await?;
    let id = state.fresh_id("s_");
    let session = state.insert_session(Session::new(id, session.0, session.1, session.2));
    let (width, height) = session.dims();
    log::info!("session {} created ({width}x{height})", session.id);
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            id: session.id.clone(),
            width,
            height,
        }),
    ))
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct MotionSummary {
    /// Mean speed over the animated region.
    pub mean: f64,
    pub max: f64,
    pub iterations: usize,
    pub converged: bool,
    pub revision: u64,
}

fn decode_data_url(url: &str) -> Result<Vec<u8>, ApiError> {
    let (meta, payload) = url
        .strip_prefix("data:")
        .and_then(|rest| rest.split_once(','))
        .ok_or_else(|| ApiError::bad_request("malformed data URL"))?;
    if !meta.ends_with(";base64") {
        return Err(ApiError::bad_request("mask data URL must be base64-encoded"));
    }
    base64::engine::general_purpose::STANDARD
        .decode(payload.trim())
        .map_err(|e| ApiError::bad_request(format!("mask data URL: {e}")))
}

/// Resolves a mask path inside the assets directory, refusing anything that
/// would escape it.
fn mask_path(assets_dir: Option<&Path>, reference: &str) -> Result<PathBuf, ApiError> {
    let root = assets_dir.ok_or_else(|| {
        ApiError::bad_request("this server has no assets directory; send the mask as a data: URL")
    })?;
    let root = root
        .canonicalize()
        .map_err(|e| ApiError::internal(format!("assets directory: {e}")))?;
    let path = root
        .join(reference)
        .canonicalize()
        .map_err(|_| ApiError::bad_request(format!("mask \"{reference}\" not found")))?;
    if !path.starts_with(&root) {
        return Err(ApiError::bad_request(format!("mask \"{reference}\" is outside the assets directory")));
    }
    Ok(path)
}

fn load_hint_mask(state: &AppState, reference: &str) -> Result<MaskImage, ApiError> {
    if reference.starts_with("data:") {
        Ok(assets::decode_mask(&decode_data_url(reference)?)?)
    } else {
        Ok(assets::load_mask(mask_path(state.config.assets_dir.as_deref(), reference)?)?)
    }
}

fn summarize(flow: &FlowField, mask: Option<&MaskImage>) -> (f64, f64) {
    let mut sum = 0.0f64;
    let mut max = 0.0f64;
    let mut count = 0usize;
    for (i, v) in flow.iter().enumerate() {
        if mask.is_some_and(|m| !m.as_slice()[i]) {
            continue;
        }
        let speed = (v[0] as f64).hypot(v[1] as f64);
        sum += speed;
        max = max.max(speed);
        count += 1;
    }
    (if count > 0 { sum / count as f64 } else { 0.0 }, max)
}

/// Body is a hints document. `mask` may be a `data:` URL or a path under the
/// assets directory; without it the whole frame is animated.
pub async fn set_motion(
    State(state): Shared,
    UrlPath(id): UrlPath<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<MotionSummary>, ApiError> {
    let session = state.session(&id)?;
    let doc: HintsDocument = parse_json(body)?;
    let state2 = state.clone();
    let session2 = session.clone();
    let (flow, summary) = blocking(move || {
        let mask = doc.mask.as_deref().map(|m| load_hint_mask(&state2, m)).transpose()?;
        let est = motion_from_hints(&doc, mask.clone(), session2.dims())?;
        let (mean, max) = summarize(&est.flow, mask.as_ref());
        Ok((est.flow, (mean, max, est.iterations, est.converged)))
    })
    .await?;
    let revision = session.set_motion(flow);
    Ok(Json(MotionSummary {
        mean: summary.0,
        max: summary.1,
        iterations: summary.2,
        converged: summary.3,
        revision,
    }))
}

#[derive(Deserialize, Serialize, Debug, Clone, PartialEq)]
#[serde(untagged)]
pub enum CameraSpec {
    /// A point on a preset path; phase wraps so 1.0 equals 0.0.
    Preset {
        preset: Preset,
        #[serde(default)]
        amplitude: Option<f64>,
        phase: f64,
    },
    /// World-to-camera rotation (row-major) and translation.
    Pose { rotation: [[f64; 3]; 3], translation: [f64; 3] },
}

#[derive(Deserialize, Serialize, Debug, Clone, Default, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RenderOverrides {
    pub splat_mode: Option<SplatMode>,
    pub radius_px: Option<f64>,
    pub z_window: Option<f64>,
    pub near: Option<f64>,
    pub sharpness: Option<f64>,
}

impl RenderOverrides {
    pub fn apply(&self, base: RenderConfig) -> Result<RenderConfig, ApiError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(ApiError::unprocessable(format!("{name} must be finite and positive")))
            }
        };
        let mut cfg = base;
        if let Some(mode) = self.splat_mode {
            cfg.splat.mode = mode;
        }
        if let Some(v) = self.radius_px {
            cfg.splat.radius_px = positive("radius_px", v)?;
        }
        if let Some(v) = self.z_window {
            cfg.splat.z_window = positive("z_window", v)?;
        }
        if let Some(v) = self.near {
            cfg.splat.near = positive("near", v)?;
        }
        if let Some(v) = self.sharpness {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ApiError::unprocessable("sharpness must be finite and non-negative"));
            }
            cfg.sharpness = v;
        }
        Ok(cfg)
    }
}

#[derive(Deserialize, Serialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PreviewRequest {
    pub t: i64,
    #[serde(rename = "N", alias = "n")]
    pub n: i64,
    /// Source camera when absent.
    #[serde(default)]
    pub camera: Option<CameraSpec>,
    #[serde(default)]
    pub overrides: RenderOverrides,
}

fn resolve_camera(spec: &Option<CameraSpec>, k: Intrinsics, median_depth: f64) -> Result<Camera, ApiError> {
    match spec {
        None => Ok(Camera::source(k)),
        Some(CameraSpec::Preset { preset, amplitude, phase }) => {
            let amplitude = amplitude.unwrap_or(DEFAULT_AMPLITUDE);
            if !(amplitude.is_finite() && amplitude >= 0.0) || !phase.is_finite() {
                return Err(ApiError::unprocessable("amplitude and phase must be finite, amplitude non-negative"));
            }
            let look_at = Vector3::new(0.0, 0.0, median_depth);
            Ok(pose_at_phase(*preset, amplitude, *phase, k, look_at, median_depth))
        }
        Some(CameraSpec::Pose { rotation, translation }) => {
            let r = Matrix3::from_fn(|i, j| rotation[i][j]);
            Ok(Camera::new(k, r, Vector3::from(*translation))?)
        }
    }
}

/// Renders one frame. The response carries the SHA-256 of its bytes in
/// `x-content-hash` (and as the ETag).
pub async fn preview(
    State(state): Shared,
    UrlPath(id): UrlPath<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let req: PreviewRequest = parse_json(body)?;
    let motion = session
        .motion()
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "motion_not_set", "set motion hints before previewing"))?;
    if req.n < 1 {
        return Err(ApiError::unprocessable(format!("N must be at least 1, got {}", req.n)));
    }
    if req.t < 0 || req.t > req.n {
        return Err(ApiError::unprocessable(format!("t must lie in 0..={}, got {}", req.n, req.t)));
    }
    let render = req.overrides.apply(RenderConfig::default())?;
    let png = blocking(move || {
        let built = session.scene()?;
        let camera = resolve_camera(&req.camera, session.intrinsics, built.median_depth)?;
        let frame = render_view(&built.scene, &motion.flow, req.t, req.n, &camera, &render)?;
        Ok(assets::encode_color_png(&frame.color)?)
    })
    .await?;
    Ok(png_response(png))
}

fn png_response(png: Vec<u8>) -> Response {
    let hash = content_hash(&png);
    let mut response = ([(header::CONTENT_TYPE, "image/png")], png).into_response();
    let headers = response.headers_mut();
    if let Ok(v) = HeaderValue::from_str(&hash) {
        headers.insert(CONTENT_HASH_HEADER, v);
    }
    if let Ok(v) = HeaderValue::from_str(&format!("\"{hash}\"")) {
        headers.insert(header::ETAG, v);
    }
    response
}

#[derive(Deserialize, Serialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RenderJobRequest {
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default = "default_preset")]
    pub trajectory: Preset,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub overrides: RenderOverrides,
}

fn default_frames() -> usize {
    DEFAULT_FRAMES
}

fn default_preset() -> Preset {
    Preset::Sway
}

fn default_amplitude() -> f64 {
    DEFAULT_AMPLITUDE
}

impl Default for RenderJobRequest {
    fn default() -> Self {
        Self {
            frames: DEFAULT_FRAMES,
            trajectory: Preset::Sway,
            amplitude: DEFAULT_AMPLITUDE,
            overrides: RenderOverrides::default(),
        }
    }
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct JobCreated {
    pub job: String,
}

/// Starts rendering frames `0..N` along a preset path. An empty body uses
/// the job defaults.
pub async fn start_render(
    State(state): Shared,
    UrlPath(id): UrlPath<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<(StatusCode, Json<JobCreated>), ApiError> {
    let session = state.session(&id)?;
    let req: RenderJobRequest = match &body {
        Ok(bytes) if bytes.iter().all(u8::is_ascii_whitespace) => RenderJobRequest::default(),
        _ => parse_json(body)?,
    };
    let motion = session
        .motion()
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "motion_not_set", "set motion hints before rendering"))?;
    if req.frames == 0 {
        return Err(ApiError::unprocessable("frames must be at least 1"));
    }
    if !(req.amplitude.is_finite() && req.amplitude >= 0.0) {
        return Err(ApiError::unprocessable("amplitude must be finite and non-negative"));
    }
    let render = req.overrides.apply(RenderConfig::default())?;
    let job = state.insert_job(Job::new(state.fresh_id("j_"), session.id.clone(), req.frames));
    let worker = job.clone();
    tokio::task::spawn_blocking(move || {
        let run = || -> Result<(), ApiError> {
            let built = session.scene()?;
            let trajectory = make_trajectory(
                req.trajectory,
                req.amplitude,
                req.frames,
                session.intrinsics,
                DepthStats {
                    median: built.median_depth,
                },
            )
            .map_err(|e| ApiError::unprocessable(e.to_string()))?;
            let n = req.frames as i64;
            for (k, camera) in trajectory.cameras.iter().take(req.frames).enumerate() {
                let frame = render_view(&built.scene, &motion.flow, k as i64, n, camera, &render)?;
                worker.push_frame(assets::encode_color_png(&frame.color)?);
            }
            Ok(())
        };
        let result = run();
        if let Err(e) = &result {
            log::warn!("job {} failed: {e}", worker.id);
        }
        worker.finish(result.map_err(|e| e.message));
    });
    Ok((StatusCode::ACCEPTED, Json(JobCreated { job: job.id.clone() })))
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct JobStatus {
    pub done: bool,
    pub total: usize,
    /// URLs of the frames rendered so far, in order.
    pub frames: Vec<String>,
    pub error: Option<String>,
}

pub async fn job_status(State(state): Shared, UrlPath(id): UrlPath<String>) -> Result<Json<JobStatus>, ApiError> {
    let job = state.job(&id)?;
    let outcome = job.outcome();
    Ok(Json(JobStatus {
        done: outcome.is_some(),
        total: job.total,
        frames: (0..job.frames_ready()).map(|k| format!("/jobs/{id}/frames/{k}")).collect(),
        error: outcome.and_then(|r| r.err()),
    }))
}

pub async fn job_frame(
    State(state): Shared,
    UrlPath((id, k)): UrlPath<(String, usize)>,
) -> Result<Response, ApiError> {
    let job = state.job(&id)?;
    let png = job
        .frame(k)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "frame_not_ready", format!("frame {k} is not available")))?;
    Ok(png_response(png.as_ref().clone()))
}
