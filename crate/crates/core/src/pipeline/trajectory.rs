//! Loop-closed camera paths.
//!
//! Every preset is a periodic function of the frame phase `k / N`, so pose
//! `N` equals pose `0` exactly and the camera motion loops together with
//! the scene motion.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::camera::{rotation_y, Camera, Intrinsics};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Still,
    Zoom,
    Sway,
    Orbit,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Still, Preset::Zoom, Preset::Sway, Preset::Orbit];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Still => "still",
            Preset::Zoom => "zoom",
            Preset::Sway => "sway",
            Preset::Orbit => "orbit",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrajectoryError {
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("trajectory needs at least one frame")]
    NoFrames,
    #[error("amplitude must be finite and non-negative, got {0}")]
    Amplitude(f64),
}

impl FromStr for Preset {
    type Err = TrajectoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| TrajectoryError::UnknownPreset(s.to_string()))
    }
}

/// Scene statistics the presets scale against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthStats {
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub preset: Preset,
    /// Fraction of median depth for zoom and sway; radians for orbit.
    pub amplitude: f64,
    pub num_frames: usize,
    pub look_at: Vector3<f64>,
    /// `num_frames + 1` poses; the last equals the first.
    pub cameras: Vec<Camera>,
}

/// Pose of frame `k` on a preset path. `k` is reduced modulo `n`, so frame
/// `n` reproduces frame 0 bit for bit.
pub fn pose_at(
    preset: Preset,
    amplitude: f64,
    k: usize,
    n: usize,
    intrinsics: Intrinsics,
    look_at: Vector3<f64>,
    median_depth: f64,
) -> Camera {
    pose_at_phase(preset, amplitude, (k % n) as f64 / n as f64, intrinsics, look_at, median_depth)
}

/// Pose at a loop phase in `[0, 1)`. Other values wrap, so phase 1 is
/// exactly phase 0.
pub fn pose_at_phase(
    preset: Preset,
    amplitude: f64,
    phase: f64,
    intrinsics: Intrinsics,
    look_at: Vector3<f64>,
    median_depth: f64,
) -> Camera {
    let phase = phase.rem_euclid(1.0);
    let reach = amplitude * median_depth;
    match preset {
        Preset::Still => Camera::source(intrinsics),
        Preset::Zoom => {
            let s = (PI * phase).sin();
            Camera::from_center(intrinsics, nalgebra::Matrix3::identity(), Vector3::new(0.0, 0.0, reach * s * s))
        }
        Preset::Sway => Camera::from_center(
            intrinsics,
            nalgebra::Matrix3::identity(),
            Vector3::new(reach * (2.0 * PI * phase).sin(), 0.0, 0.0),
        ),
        Preset::Orbit => {
            // rotating the whole rig about the look-at point keeps it centered
            let theta = amplitude * (2.0 * PI * phase).sin();
            let cam_to_world = rotation_y(theta);
            let center = look_at - cam_to_world * look_at;
            Camera::from_center(intrinsics, cam_to_world.transpose(), center)
        }
    }
}

pub fn make_trajectory(
    preset: Preset,
    amplitude: f64,
    num_frames: usize,
    intrinsics: Intrinsics,
    depth: DepthStats,
) -> Result<Trajectory, TrajectoryError> {
    if num_frames == 0 {
        return Err(TrajectoryError::NoFrames);
    }
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(TrajectoryError::Amplitude(amplitude));
    }
    let look_at = Vector3::new(0.0, 0.0, depth.median);
    let cameras = (0..=num_frames)
        .map(|k| pose_at(preset, amplitude, k, num_frames, intrinsics, look_at, depth.median))
        .collect();
    Ok(Trajectory {
        preset,
        amplitude,
        num_frames,
        look_at,
        cameras,
    })
}
