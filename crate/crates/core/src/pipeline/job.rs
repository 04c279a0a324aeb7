use std::path::{Path, PathBuf};

use thiserror::Error;

use super::config::{ConfigError, JobConfig, MotionSource};
use super::trajectory::{make_trajectory, DepthStats, Trajectory, TrajectoryError};
use crate::assets::{self, AssetBundle};
use crate::camera::Intrinsics;
use crate::error::{AssetError, MotionError, RenderError, SceneError};
use crate::grid::{FlowField, Grid, MaskImage};
use crate::motion::{self, HintsDocument, MotionEstimate, DEFAULT_HINT_SOLVER};
use crate::par;
use crate::renderer::{render_view, Frame, RenderConfig};
use crate::scene::{build_scene, dump_layers, Scene};

#[derive(Debug, Error)]
pub enum JobError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error("hints: {0}")]
    Hints(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

impl JobError {
    /// Process exit code: 2 config, 3 asset, 4 render.
    pub fn exit_code(&self) -> i32 {
        match self {
            JobError::Config(_) | JobError::Hints(_) | JobError::Motion(_) | JobError::Trajectory(_) => 2,
            JobError::Asset(_) => 3,
            JobError::Scene(_) | JobError::Render(_) => 4,
        }
    }
}

/// Reads a hints document; its mask path resolves next to the document.
pub fn load_hints(path: &Path) -> Result<(HintsDocument, Option<PathBuf>), JobError> {
    let text = std::fs::read_to_string(path).map_err(|e| AssetError::io(path, e))?;
    let doc: HintsDocument =
        serde_json::from_str(&text).map_err(|e| JobError::Hints(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mask = doc.mask.as_ref().map(|m| {
        let p = PathBuf::from(m);
        if p.is_relative() {
            base.join(p)
        } else {
            p
        }
    });
    Ok((doc, mask))
}

/// Densifies a hints document for a `size` image. No mask means the whole
/// frame may move.
pub fn motion_from_hints(
    doc: &HintsDocument,
    mask: Option<MaskImage>,
    size: (usize, usize),
) -> Result<MotionEstimate, MotionError> {
    let mask = mask.unwrap_or_else(|| Grid::filled(size.0, size.1, true));
    let mut est = motion::estimate_motion_from_hints(&mask, &doc.hints, size, &DEFAULT_HINT_SOLVER)?;
    est.flow = motion::scale_flow(&est.flow, doc.speed)?;
    Ok(est)
}

/// Everything a frame needs, built once per job.
#[derive(Clone, Debug)]
pub struct PreparedJob {
    pub scene: Scene,
    pub flow: FlowField,
    pub trajectory: Trajectory,
    pub render: RenderConfig,
}

impl PreparedJob {
    pub fn frames(&self) -> usize {
        self.trajectory.num_frames
    }

    /// Frame `k` (`0..=N`) of the loop.
    pub fn render_frame(&self, k: usize) -> Result<Frame, RenderError> {
        let n = self.trajectory.num_frames;
        render_view(
            &self.scene,
            &self.flow,
            k as i64,
            n as i64,
            &self.trajectory.cameras[k.min(n)],
            &self.render,
        )
    }
}

/// Loads assets, builds the scene and motion field, and lays out the camera
/// path. Nothing is rendered yet.
pub fn prepare(config: &JobConfig) -> Result<PreparedJob, JobError> {
    let color = assets::load_color(&config.image)?;
    let depth = assets::load_depth(&config.depth, config.depth_scale)?;
    let (flow, mask, hints) = match &config.motion {
        MotionSource::Flow(path) => (Some(assets::load_flow(path)?), None, None),
        MotionSource::Hints(path) => {
            let (doc, mask_path) = load_hints(path)?;
            let mask = mask_path.map(assets::load_mask).transpose()?;
            (None, mask, Some(doc))
        }
    };
    let bundle = AssetBundle::new(color, depth, flow, mask)?;
    let dims = bundle.dims();

    let flow = match (bundle.flow, hints) {
        (Some(flow), _) => flow,
        (None, Some(doc)) => {
            let est = motion_from_hints(&doc, bundle.mask, dims)?;
            if !est.converged {
                log::warn!("hint solver stopped after {} sweeps without converging", est.iterations);
            }
            est.flow
        }
        (None, None) => unreachable!("validated config always names a motion source"),
    };
    let flow = motion::scale_flow(&flow, config.speed)?;

    let intrinsics = Intrinsics::from_fov(dims.0, dims.1, config.fov_deg);
    let scene = build_scene(&bundle.color, &bundle.depth, intrinsics, &config.scene)?;
    log::info!(
        "scene: {} layers, {} points",
        scene.layers.len(),
        scene.cloud.len()
    );
    let trajectory = make_trajectory(
        config.preset,
        config.amplitude,
        config.frames,
        intrinsics,
        DepthStats {
            median: scene.median_depth(),
        },
    )?;
    Ok(PreparedJob {
        scene,
        flow,
        trajectory,
        render: config.render,
    })
}

/// Renders frames `0..N` as PNG bytes, in order.
pub fn render_frames_png(job: &PreparedJob) -> Result<Vec<Vec<u8>>, JobError> {
    par::map_range(job.frames(), |k| -> Result<Vec<u8>, JobError> {
        let frame = job.render_frame(k)?;
        Ok(assets::encode_color_png(&frame.color)?)
    })
    .into_iter()
    .collect()
}

/// Runs a whole job and returns the written frame paths in order.
pub fn render_cinemagraph(config: &JobConfig) -> Result<Vec<PathBuf>, JobError> {
    let job = prepare(config)?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| AssetError::io(&config.out_dir, e))?;
    if config.dump_layers {
        let dir = config.out_dir.join("layers");
        std::fs::create_dir_all(&dir).map_err(|e| AssetError::io(&dir, e))?;
        dump_layers(&job.scene, &dir)?;
    }
    let pngs = par::with_threads(config.threads, || render_frames_png(&job))?;
    let mut paths = Vec::with_capacity(pngs.len());
    for (k, png) in pngs.iter().enumerate() {
        let path = config.out_dir.join(assets::frame_file_name(k));
        std::fs::write(&path, png).map_err(|e| AssetError::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
