//! Job configuration: a single JSON document, validated up front.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::trajectory::Preset;
use crate::renderer::{RenderConfig, SplatMode};
use crate::scene::SceneConfig;

pub const DEFAULT_FRAMES: usize = 60;
pub const DEFAULT_AMPLITUDE: f64 = 0.05;
pub const DEFAULT_FOV_DEG: f64 = 60.0;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("ambiguous motion source: give either \"flow\" or \"hints\", not both")]
    AmbiguousMotion,
    #[error("no motion source: give \"flow\" or \"hints\"")]
    MissingMotion,
    #[error("missing required key {0:?}")]
    MissingKey(&'static str),
    #[error("{key}: file not found: {path}")]
    MissingFile { key: &'static str, path: PathBuf },
    #[error("invalid value for {key}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneSection {
    gap_threshold: Option<f64>,
    max_layers: Option<usize>,
    band_px: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplatSection {
    mode: Option<SplatMode>,
    radius_px: Option<f64>,
    z_window: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlendSection {
    sharpness: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CullSection {
    near: Option<f64>,
}

/// The on-disk document. Every key is optional at parse time so that
/// missing required keys get a specific error.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobDocument {
    image: Option<PathBuf>,
    depth: Option<PathBuf>,
    flow: Option<PathBuf>,
    hints: Option<PathBuf>,
    out: Option<PathBuf>,
    trajectory: Option<Preset>,
    amplitude: Option<f64>,
    frames: Option<usize>,
    depth_scale: Option<f32>,
    fov_deg: Option<f64>,
    speed: Option<f32>,
    threads: Option<usize>,
    dump_layers: Option<bool>,
    scene: Option<SceneSection>,
    splat: Option<SplatSection>,
    blend: Option<BlendSection>,
    cull: Option<CullSection>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MotionSource {
    /// Dense `.flo` field.
    Flow(PathBuf),
    /// Hints JSON document.
    Hints(PathBuf),
}

/// A validated job with every default filled in and every path resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct JobConfig {
    pub image: PathBuf,
    pub depth: PathBuf,
    pub motion: MotionSource,
    pub out_dir: PathBuf,
    pub preset: Preset,
    pub amplitude: f64,
    pub frames: usize,
    pub depth_scale: f32,
    pub fov_deg: f64,
    /// Multiplies the motion field (on top of a hints document's own speed).
    pub speed: f32,
    /// Worker threads for rendering; 0 uses every core.
    pub threads: usize,
    pub dump_layers: bool,
    pub scene: SceneConfig,
    pub render: RenderConfig,
}

fn positive(key: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::Invalid {
            key,
            reason: format!("must be finite and positive, got {v}"),
        })
    }
}

fn existing(key: &'static str, path: PathBuf, base: &Path) -> Result<PathBuf, ConfigError> {
    let path = resolve(path, base);
    if path.is_file() {
        Ok(path)
    } else {
        Err(ConfigError::MissingFile { key, path })
    }
}

fn resolve(path: PathBuf, base: &Path) -> PathBuf {
    if path.is_relative() {
        base.join(path)
    } else {
        path
    }
}

/// Validates a job document. Relative paths resolve against `base_dir`
/// (normally the directory holding the config file).
pub fn validate_config(document: &serde_json::Value, base_dir: &Path) -> Result<JobConfig, ConfigError> {
    let doc: JobDocument =
        serde_json::from_value(document.clone()).map_err(|e| ConfigError::Parse(e.to_string()))?;

    let motion = match (doc.flow, doc.hints) {
        (Some(_), Some(_)) => return Err(ConfigError::AmbiguousMotion),
        (None, None) => return Err(ConfigError::MissingMotion),
        (Some(flow), None) => MotionSource::Flow(existing("flow", flow, base_dir)?),
        (None, Some(hints)) => MotionSource::Hints(existing("hints", hints, base_dir)?),
    };
    let image = existing("image", doc.image.ok_or(ConfigError::MissingKey("image"))?, base_dir)?;
    let depth = existing("depth", doc.depth.ok_or(ConfigError::MissingKey("depth"))?, base_dir)?;
    let out_dir = resolve(doc.out.ok_or(ConfigError::MissingKey("out"))?, base_dir);

    let frames = doc.frames.unwrap_or(DEFAULT_FRAMES);
    if frames == 0 {
        return Err(ConfigError::Invalid {
            key: "frames",
            reason: "must be at least 1".into(),
        });
    }
    let amplitude = doc.amplitude.unwrap_or(DEFAULT_AMPLITUDE);
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(ConfigError::Invalid {
            key: "amplitude",
            reason: format!("must be finite and non-negative, got {amplitude}"),
        });
    }

    let scene_doc = doc.scene.unwrap_or_default();
    let mut scene = SceneConfig::default();
    if let Some(g) = scene_doc.gap_threshold {
        if !(g > 0.0 && g < 1.0) {
            return Err(ConfigError::Invalid {
                key: "scene.gap_threshold",
                reason: format!("must lie in (0, 1), got {g}"),
            });
        }
        scene.gap_threshold = g;
    }
    if let Some(l) = scene_doc.max_layers {
        if l == 0 {
            return Err(ConfigError::Invalid {
                key: "scene.max_layers",
                reason: "must be at least 1".into(),
            });
        }
        scene.max_layers = l;
    }
    scene.band_px = scene_doc.band_px.unwrap_or(scene.band_px);

    let mut render = RenderConfig::default();
    let splat = doc.splat.unwrap_or_default();
    render.splat.mode = splat.mode.unwrap_or(render.splat.mode);
    if let Some(r) = splat.radius_px {
        render.splat.radius_px = positive("splat.radius_px", r)?;
    }
    if let Some(z) = splat.z_window {
        if !(z.is_finite() && z >= 0.0) {
            return Err(ConfigError::Invalid {
                key: "splat.z_window",
                reason: format!("must be finite and non-negative, got {z}"),
            });
        }
        render.splat.z_window = z;
    }
    if let Some(s) = doc.blend.and_then(|b| b.sharpness) {
        if !(s.is_finite() && s >= 0.0) {
            return Err(ConfigError::Invalid {
                key: "blend.sharpness",
                reason: format!("must be finite and non-negative, got {s}"),
            });
        }
        render.sharpness = s;
    }
    if let Some(near) = doc.cull.and_then(|c| c.near) {
        render.splat.near = positive("cull.near", near)?;
    }

    Ok(JobConfig {
        image,
        depth,
        motion,
        out_dir,
        preset: doc.trajectory.unwrap_or(Preset::Sway),
        amplitude,
        frames,
        depth_scale: positive("depth_scale", doc.depth_scale.unwrap_or(1.0) as f64)? as f32,
        fov_deg: {
            let f = positive("fov_deg", doc.fov_deg.unwrap_or(DEFAULT_FOV_DEG))?;
            if f >= 180.0 {
                return Err(ConfigError::Invalid {
                    key: "fov_deg",
                    reason: format!("must be below 180, got {f}"),
                });
            }
            f
        },
        speed: positive("speed", doc.speed.unwrap_or(1.0) as f64)? as f32,
        threads: doc.threads.unwrap_or(0),
        dump_layers: doc.dump_layers.unwrap_or(false),
        scene,
        render,
    })
}

/// Reads and validates a config file; paths resolve next to it.
pub fn load_config(path: &Path) -> Result<JobConfig, ConfigError> {
    let doc = read_document(path)?;
    validate_config(&doc, path.parent().unwrap_or(Path::new(".")))
}

pub fn read_document(path: &Path) -> Result<serde_json::Value, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    fn files() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for name in ["img.png", "d.pfm", "m.flo", "h.json"] {
            std::fs::write(dir.path().join(name), b"x").unwrap();
        }
        dir
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = files();
        let cfg = validate_config(
            &json!({"image": "img.png", "depth": "d.pfm", "flow": "m.flo", "out": "frames"}),
            dir.path(),
        )
        .unwrap();
        assert_eq!(cfg.preset, Preset::Sway);
        assert_eq!(cfg.frames, 60);
        assert_eq!(cfg.render.splat.mode, SplatMode::Soft);
        assert_eq!(cfg.render, RenderConfig::default());
        assert_eq!(cfg.scene, SceneConfig::default());
        assert_eq!(cfg.motion, MotionSource::Flow(dir.path().join("m.flo")));
        assert_eq!(cfg.out_dir, dir.path().join("frames"));
    }

    #[test]
    fn both_motion_sources_rejected() {
        let dir = files();
        let err = validate_config(
            &json!({"image": "img.png", "depth": "d.pfm", "flow": "m.flo", "hints": "h.json", "out": "o"}),
            dir.path(),
        )
        .unwrap_err();
        assert_eq!(err, ConfigError::AmbiguousMotion);
        assert!(err.to_string().starts_with("ambiguous motion source"));
    }

    #[test]
    fn unknown_key_is_named() {
        let dir = files();
        let err = validate_config(
            &json!({"image": "img.png", "depth": "d.pfm", "flow": "m.flo", "out": "o", "fps2": 30}),
            dir.path(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("fps2"), "{err}");
    }

    #[test]
    fn nested_overrides_apply() {
        let dir = files();
        let cfg = validate_config(
            &json!({
                "image": "img.png", "depth": "d.pfm", "hints": "h.json", "out": "o",
                "trajectory": "orbit", "frames": 12, "amplitude": 0.1,
                "splat": {"mode": "nearest", "radius_px": 1.5, "z_window": 0.02},
                "blend": {"sharpness": 4.0}, "cull": {"near": 0.01},
                "scene": {"gap_threshold": 0.2, "max_layers": 2, "band_px": 4}
            }),
            dir.path(),
        )
        .unwrap();
        assert_eq!(cfg.preset, Preset::Orbit);
        assert_eq!(cfg.render.splat.mode, SplatMode::Nearest);
        assert_eq!(cfg.render.splat.radius_px, 1.5);
        assert_eq!(cfg.render.sharpness, 4.0);
        assert_eq!(cfg.render.splat.near, 0.01);
        assert_eq!(cfg.scene.max_layers, 2);
    }

    #[test]
    fn type_mismatch_and_bad_values() {
        let dir = files();
        let base = json!({"image": "img.png", "depth": "d.pfm", "flow": "m.flo", "out": "o"});
        let with = |k: &str, v: serde_json::Value| {
            let mut d = base.clone();
            d[k] = v;
            validate_config(&d, dir.path())
        };
        assert!(matches!(with("frames", json!("ten")), Err(ConfigError::Parse(_))));
        assert!(matches!(with("frames", json!(0)), Err(ConfigError::Invalid { key: "frames", .. })));
        assert!(matches!(with("trajectory", json!("spiral")), Err(ConfigError::Parse(_))));
        assert!(matches!(with("speed", json!(-1.0)), Err(ConfigError::Invalid { key: "speed", .. })));
    }

    #[test]
    fn missing_files_and_keys() {
        let dir = files();
        let err = validate_config(
            &json!({"image": "img.png", "depth": "nope.pfm", "flow": "m.flo", "out": "o"}),
            dir.path(),
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::MissingFile { key: "depth", .. }));
        let err = validate_config(&json!({"image": "img.png", "depth": "d.pfm", "out": "o"}), dir.path()).unwrap_err();
        assert_eq!(err, ConfigError::MissingMotion);
        let err = validate_config(&json!({"depth": "d.pfm", "flow": "m.flo", "out": "o"}), dir.path()).unwrap_err();
        assert_eq!(err, ConfigError::MissingKey("image"));
    }
}
