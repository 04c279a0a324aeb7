use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use cinema3d_core::error::{AssetError, MotionError, RenderError, SceneError};

/// Every failure leaves the service as `{"code": ..., "message": ...}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message)
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id}"))
    }

    pub fn unknown_job(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_job", format!("no job {id}"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    /// Body-size and transport failures carry their own status.
    pub fn from_status(status: StatusCode, message: impl Into<String>) -> Self {
        if status == StatusCode::PAYLOAD_TOO_LARGE {
            Self::new(status, "payload_too_large", message)
        } else {
            Self::new(status, "bad_request", message)
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({}): {}", self.status.as_u16(), self.code, self.message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "code": self.code, "message": self.message });
        (self.status, Json(body)).into_response()
    }
}

impl From<AssetError> for ApiError {
    fn from(e: AssetError) -> Self {
        match e {
            AssetError::DimensionMismatch { .. } => {
                Self::new(StatusCode::BAD_REQUEST, "dimension_mismatch", e.to_string())
            }
            _ => Self::new(StatusCode::BAD_REQUEST, "undecodable_asset", e.to_string()),
        }
    }
}

impl From<MotionError> for ApiError {
    fn from(e: MotionError) -> Self {
        let code = match e {
            MotionError::HintOutsideMask { .. } | MotionError::HintOutsideImage { .. } => "hint_outside_mask",
            _ => "invalid_hints",
        };
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string())
    }
}

impl From<SceneError> for ApiError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::InvalidCamera(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_camera", e.to_string()),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "scene_failed", e.to_string()),
        }
    }
}

impl From<RenderError> for ApiError {
    fn from(e: RenderError) -> Self {
        match e {
            RenderError::TimeOutOfRange { .. } | RenderError::ZeroLoopLength => Self::unprocessable(e.to_string()),
            RenderError::Scene(inner) => inner.into(),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "render_failed", e.to_string()),
        }
    }
}
