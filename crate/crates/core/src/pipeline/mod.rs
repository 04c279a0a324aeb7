//! Camera paths, job configuration and end-to-end orchestration.

pub mod config;
pub mod job;
pub mod trajectory;

pub use config::{load_config, validate_config, ConfigError, JobConfig, MotionSource};
pub use job::{
    load_hints, motion_from_hints, prepare, render_cinemagraph, render_frames_png, JobError, PreparedJob,
};
pub use trajectory::{make_trajectory, pose_at, pose_at_phase, DepthStats, Preset, Trajectory, TrajectoryError};
