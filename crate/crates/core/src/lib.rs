//! Looping 3D cinemagraphs from a single image.
//!
//! Given a color image, a depth map and a velocity field (or a few velocity
//! hints inside a mask), the engine builds a layered, inpainted point cloud
//! of the scene, animates it in both directions along the integrated motion,
//! renders both copies from a moving camera and blends them so that the
//! last frame flows seamlessly into the first.
//!
//! ```no_run
//! use cinema3d_core::pipeline::{load_config, render_cinemagraph};
//!
//! let config = load_config("job.json".as_ref()).unwrap();
//! let frames = render_cinemagraph(&config).unwrap();
//! println!("wrote {} frames", frames.len());
//! ```

pub mod assets;
pub mod camera;
pub mod diffusion;
pub mod error;
pub mod grid;
pub mod motion;
pub mod par;
pub mod pipeline;
pub mod renderer;
pub mod scene;
pub mod synthetic;

pub use camera::{Camera, Intrinsics};
pub use error::{AssetError, MotionError, RenderError, SceneError};
pub use grid::{AlphaMap, ColorImage, DepthMap, FlowField, Grid, MaskImage, Rgb};
pub use motion::{DisplacementField, Direction, FlowHint, HintsDocument};
pub use renderer::{Frame, RenderConfig, RenderLayers, SplatConfig, SplatMode};
pub use scene::{PointCloud, Scene, SceneConfig};
