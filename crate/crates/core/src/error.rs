use std::path::PathBuf;

use thiserror::Error;

/// Failures while reading or writing external data files.
#[derive(Debug, Error)]
pub enum AssetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed image: {0}")]
    MalformedImage(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("image has zero width or height")]
    ZeroDimension,
    #[error("expected grayscale PFM")]
    ColorPfm,
    #[error("malformed PFM: {0}")]
    MalformedPfm(String),
    #[error("degenerate depth: {bad} of {total} pixels are non-positive or non-finite")]
    DegenerateDepth { bad: usize, total: usize },
    #[error("not a .flo file")]
    NotFlo,
    #[error("invalid .flo dimensions {width}x{height}")]
    FloDimensions { width: i64, height: i64 },
    #[error("truncated flow: expected {expected} bytes of payload, found {found}")]
    TruncatedFlow { expected: usize, found: usize },
    #[error("dimension mismatch: {what} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        what: &'static str,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
}

impl AssetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AssetError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures while building the motion field.
#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("no motion hints given")]
    NoHints,
    #[error("no animation region: mask is empty")]
    EmptyMask,
    #[error("hint {index} at ({x}, {y}) is outside the image")]
    HintOutsideImage { index: usize, x: f32, y: f32 },
    #[error("hint {index} at ({x}, {y}) is outside the mask")]
    HintOutsideMask { index: usize, x: f32, y: f32 },
    #[error("hint {index} has a non-finite component")]
    NonFiniteHint { index: usize },
    #[error("speed must be finite and positive, got {0}")]
    InvalidSpeed(f32),
    #[error("mask is {got_w}x{got_h} but the image is {want_w}x{want_h}")]
    MaskDimensions {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
}

/// Failures in scene construction and geometry.
#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("gap threshold must lie in (0, 1), got {0}")]
    GapThreshold(f64),
    #[error("layer count limit must be at least 1")]
    ZeroLayers,
    #[error("non-positive depth {depth} at valid pixel ({x}, {y})")]
    NonPositiveDepth { x: usize, y: usize, depth: f32 },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("length mismatch: cloud has {points} points, flow has {vectors} vectors")]
    LengthMismatch { points: usize, vectors: usize },
    #[error("input dimensions differ: color {0}x{1}, depth {2}x{3}")]
    Dimensions(usize, usize, usize, usize),
}

/// Failures in the render path.
#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("loop length must be at least 1")]
    ZeroLoopLength,
    #[error("time index {t} outside 0..={n}")]
    TimeOutOfRange { t: i64, n: i64 },
    #[error("layer dimensions differ: {0}x{1} vs {2}x{3}")]
    Dimensions(usize, usize, usize, usize),
    #[error(transparent)]
    Scene(#[from] SceneError),
}
