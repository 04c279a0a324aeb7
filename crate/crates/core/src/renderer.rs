//! Splatting and bidirectional compositing.
//!
//! A frame at time `t` of an `N`-frame loop renders two copies of the scene
//! cloud: one pushed forward along the motion field for `t` steps and one
//! pushed backward for `N − t` steps. The two renders are blended per pixel
//! with a weight that moves linearly from the forward copy at `t = 0` to the
//! backward copy at `t = N`, favors the nearer surface, and ignores
//! uncovered pixels. Both endpoints therefore reduce to the undisplaced
//! cloud, which is what makes the loop seamless.

use std::cmp::Ordering;

use crate::camera::Camera;
use crate::diffusion::{self, CellKind, SolverConfig};
use crate::error::RenderError;
use crate::grid::{AlphaMap, ColorImage, DepthMap, Grid, MaskImage};
use crate::motion::{euler_integrate, Direction};
use crate::par;
use crate::scene::{displace, lift_flow, PointCloud, Scene};
use crate::grid::FlowField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplatMode {
    /// One pixel per point, nearest depth wins.
    Nearest,
    /// Tent-filter footprint, depth-windowed accumulation.
    Soft,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplatConfig {
    pub mode: SplatMode,
    /// Footprint radius for soft splatting. 1 px is a bilinear footprint.
    pub radius_px: f64,
    /// Relative depth window for soft accumulation.
    pub z_window: f64,
    /// Points at or in front of this camera-space depth are culled.
    pub near: f64,
}

impl Default for SplatConfig {
    fn default() -> Self {
        Self {
            mode: SplatMode::Soft,
            radius_px: 1.0,
            z_window: 0.01,
            near: 1e-3,
        }
    }
}

/// Hole fill for composited frames; same solver settings as layer inpainting.
pub const HOLE_FILL_SOLVER: SolverConfig = crate::scene::INPAINT_SOLVER;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderConfig {
    pub splat: SplatConfig,
    /// Depth preference strength in the blend weight.
    pub sharpness: f64,
    pub hole_fill: SolverConfig,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            splat: SplatConfig::default(),
            sharpness: 10.0,
            hole_fill: HOLE_FILL_SOLVER,
        }
    }
}

/// Output of one splat pass. Color is un-premultiplied; depth and alpha are
/// zero exactly where nothing landed.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderLayers {
    pub color: ColorImage,
    pub depth: DepthMap,
    pub alpha: AlphaMap,
}

impl RenderLayers {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            color: Grid::filled(width, height, [0.0; 3]),
            depth: Grid::filled(width, height, 0.0),
            alpha: Grid::filled(width, height, 0.0),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.color.dims()
    }

    /// Number of pixels with zero coverage.
    pub fn hole_count(&self) -> usize {
        self.alpha.iter().filter(|&&a| a <= 0.0).count()
    }
}

#[derive(Clone, Copy, Debug)]
struct Fragment {
    pixel: u32,
    point: u32,
    depth: f64,
    weight: f64,
}

fn fragment_order(a: &Fragment, b: &Fragment) -> Ordering {
    a.pixel
        .cmp(&b.pixel)
        .then(a.depth.total_cmp(&b.depth))
        .then(a.point.cmp(&b.point))
}

/// Forward-projects `cloud` into a `width × height` view.
pub fn splat(cloud: &PointCloud, camera: &Camera, width: usize, height: usize, config: &SplatConfig) -> RenderLayers {
    let (wf, hf) = (width as f64, height as f64);
    let radius = config.radius_px.max(1e-6);
    let mut fragments: Vec<Fragment> = par::flat_map_range(cloud.len(), |i| {
        let mut out: Vec<Fragment> = Vec::new();
        let (x, y, z) = camera.project(&cloud.points[i].position);
        if !(z > config.near) || !x.is_finite() || !y.is_finite() {
            return out;
        }
        match config.mode {
            SplatMode::Nearest => {
                let (px, py) = ((x + 0.5).floor(), (y + 0.5).floor());
                if px >= 0.0 && py >= 0.0 && px < wf && py < hf {
                    out.push(Fragment {
                        pixel: (py as usize * width + px as usize) as u32,
                        point: i as u32,
                        depth: z,
                        weight: 1.0,
                    });
                }
            }
            SplatMode::Soft => {
                let x0 = (x - radius).ceil().max(0.0);
                let x1 = (x + radius).floor().min(wf - 1.0);
                let y0 = (y - radius).ceil().max(0.0);
                let y1 = (y + radius).floor().min(hf - 1.0);
                let mut py = y0;
                while py <= y1 {
                    let wy = 1.0 - (py - y).abs() / radius;
                    let mut px = x0;
                    while px <= x1 {
                        let wx = 1.0 - (px - x).abs() / radius;
                        let weight = wx * wy;
                        if weight > 0.0 {
                            out.push(Fragment {
                                pixel: (py as usize * width + px as usize) as u32,
                                point: i as u32,
                                depth: z,
                                weight,
                            });
                        }
                        px += 1.0;
                    }
                    py += 1.0;
                }
            }
        }
        out
    });
    par::sort_unstable_by(&mut fragments, fragment_order);

    let mut layers = RenderLayers::empty(width, height);
    let mut start = 0;
    while start < fragments.len() {
        let pixel = fragments[start].pixel;
        let mut end = start + 1;
        while end < fragments.len() && fragments[end].pixel == pixel {
            end += 1;
        }
        let group = &fragments[start..end];
        let p = pixel as usize;
        match config.mode {
            SplatMode::Nearest => {
                let f = group[0];
                layers.color.as_mut_slice()[p] = cloud.points[f.point as usize].color;
                layers.depth.as_mut_slice()[p] = f.depth as f32;
                layers.alpha.as_mut_slice()[p] = 1.0;
            }
            SplatMode::Soft => {
                let cutoff = group[0].depth * (1.0 + config.z_window);
                let (mut sw, mut sz) = (0.0f64, 0.0f64);
                let mut sc = [0.0f64; 3];
                for f in group.iter().take_while(|f| f.depth <= cutoff) {
                    let c = cloud.points[f.point as usize].color;
                    sw += f.weight;
                    sz += f.weight * f.depth;
                    for k in 0..3 {
                        sc[k] += f.weight * c[k] as f64;
                    }
                }
                layers.color.as_mut_slice()[p] = sc.map(|v| (v / sw) as f32);
                layers.depth.as_mut_slice()[p] = (sz / sw) as f32;
                layers.alpha.as_mut_slice()[p] = sw.min(1.0) as f32;
            }
        }
        start = end;
    }
    layers
}

/// Per-pixel blend factor for the forward render, plus the pixels neither
/// render covers.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMap {
    pub weights: Grid<f64>,
    pub hole: MaskImage,
}

impl WeightMap {
    pub fn hole_count(&self) -> usize {
        self.hole.count()
    }
}

/// Blend weight of the forward render at time `t` of an `n`-step loop.
///
/// With depths jointly normalized to `[0, 1]` over covered pixels,
/// `W = a_f / (a_f + a_b)` where `a_f = (1 − t/n)·α_f·exp(−s·D̂_f)` and
/// `a_b = (t/n)·α_b·exp(−s·D̂_b)`, evaluated in the log domain. Pixels where
/// both terms vanish are holes, including those covered only by a render
/// whose time factor is zero.
pub fn blend_weights(
    fwd: &RenderLayers,
    bwd: &RenderLayers,
    t: i64,
    n: i64,
    sharpness: f64,
) -> Result<WeightMap, RenderError> {
    if n <= 0 {
        return Err(RenderError::ZeroLoopLength);
    }
    if t < 0 || t > n {
        return Err(RenderError::TimeOutOfRange { t, n });
    }
    let (w, h) = fwd.dims();
    if bwd.dims() != (w, h) {
        return Err(RenderError::Dimensions(w, h, bwd.dims().0, bwd.dims().1));
    }

    let covered_depths = fwd
        .alpha
        .iter()
        .zip(fwd.depth.iter())
        .chain(bwd.alpha.iter().zip(bwd.depth.iter()))
        .filter(|(&a, _)| a > 0.0)
        .map(|(_, &d)| d as f64);
    let (d_min, d_max) = covered_depths.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
    let span = d_max - d_min + 1e-8;

    let phase = t as f64 / n as f64;
    let (ln_fwd_time, ln_bwd_time) = ((1.0 - phase).ln(), phase.ln());

    let mut weights = Grid::filled(w, h, 0.0f64);
    let mut hole = Grid::filled(w, h, false);
    for i in 0..w * h {
        let (af, ab) = (fwd.alpha.as_slice()[i] as f64, bwd.alpha.as_slice()[i] as f64);
        if af <= 0.0 && ab <= 0.0 {
            hole.as_mut_slice()[i] = true;
            continue;
        }
        let log_term = |alpha: f64, depth: f32, ln_time: f64| {
            if alpha <= 0.0 {
                f64::NEG_INFINITY
            } else {
                let dn = (depth as f64 - d_min) / span;
                ln_time + alpha.ln() - sharpness * dn
            }
        };
        let lf = log_term(af, fwd.depth.as_slice()[i], ln_fwd_time);
        let lb = log_term(ab, bwd.depth.as_slice()[i], ln_bwd_time);
        if lf == f64::NEG_INFINITY && lb == f64::NEG_INFINITY {
            // only a render with zero time weight lands here (t = 0 or t = n);
            // filling it like a hole keeps frame 0 and frame n identical
            hole.as_mut_slice()[i] = true;
            continue;
        }
        weights.as_mut_slice()[i] = logistic_weight(lf, lb);
    }
    Ok(WeightMap { weights, hole })
}

/// `e^lf / (e^lf + e^lb)` without overflow. At least one side is finite.
fn logistic_weight(lf: f64, lb: f64) -> f64 {
    if lb == f64::NEG_INFINITY {
        1.0
    } else if lf == f64::NEG_INFINITY {
        0.0
    } else if lf >= lb {
        1.0 / (1.0 + (lb - lf).exp())
    } else {
        let e = (lf - lb).exp();
        e / (1.0 + e)
    }
}

/// Result of blending two renders, before it is tagged with time and camera.
#[derive(Clone, Debug, PartialEq)]
pub struct Composite {
    pub color: ColorImage,
    pub depth: DepthMap,
    /// Pixels neither render covered; filled by diffusion.
    pub holes: usize,
}

/// Blends the two renders and fills any remaining holes.
pub fn composite(
    fwd: &RenderLayers,
    bwd: &RenderLayers,
    weights: &WeightMap,
    fill: &SolverConfig,
) -> Result<Composite, RenderError> {
    let (w, h) = fwd.dims();
    for dims in [bwd.dims(), weights.weights.dims()] {
        if dims != (w, h) {
            return Err(RenderError::Dimensions(w, h, dims.0, dims.1));
        }
    }
    let n = w * h;
    let mut values = vec![[0.0f64; 4]; n];
    let mut kinds = vec![CellKind::Fixed; n];
    for i in 0..n {
        if weights.hole.as_slice()[i] {
            kinds[i] = CellKind::Free;
            continue;
        }
        let wt = weights.weights.as_slice()[i];
        let (cf, cb) = (fwd.color.as_slice()[i], bwd.color.as_slice()[i]);
        let (df, db) = (fwd.depth.as_slice()[i] as f64, bwd.depth.as_slice()[i] as f64);
        let v = &mut values[i];
        for k in 0..3 {
            v[k] = wt * cf[k] as f64 + (1.0 - wt) * cb[k] as f64;
        }
        v[3] = wt * df + (1.0 - wt) * db;
    }
    let holes = weights.hole_count();
    if holes == n {
        log::warn!("frame has no coverage at all; emitting black");
    } else if holes > 0 {
        diffusion::solve(w, h, &kinds, &mut values, fill);
    }
    let color = values
        .iter()
        .map(|v| [v[0], v[1], v[2]].map(|c| (c as f32).clamp(0.0, 1.0)))
        .collect();
    let depth = values.iter().map(|v| (v[3] as f32).max(0.0)).collect();
    Ok(Composite {
        color: Grid::from_vec(w, h, color),
        depth: Grid::from_vec(w, h, depth),
        holes,
    })
}

/// A finished output frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub color: ColorImage,
    pub depth: DepthMap,
    pub time_index: i64,
    pub camera: Camera,
    pub holes: usize,
}

/// Every intermediate of one frame, for inspection and tests.
#[derive(Clone, Debug)]
pub struct ViewRender {
    pub forward: RenderLayers,
    pub backward: RenderLayers,
    pub weights: WeightMap,
    pub frame: Frame,
}

/// Renders the cloud displaced by `steps` of `flow` in `direction`.
pub fn render_displaced(
    scene: &Scene,
    flow: &FlowField,
    steps: usize,
    direction: Direction,
    camera: &Camera,
    config: &SplatConfig,
) -> Result<RenderLayers, RenderError> {
    let source = scene.source_camera();
    let cloud = if steps == 0 {
        None
    } else {
        let field = euler_integrate(flow, steps, direction);
        Some(displace(&scene.cloud, &lift_flow(&field, &scene.cloud, &source))?)
    };
    Ok(splat(
        cloud.as_ref().unwrap_or(&scene.cloud),
        camera,
        scene.width,
        scene.height,
        config,
    ))
}

/// Renders frame `t` of an `n`-frame loop from `camera`, keeping intermediates.
pub fn render_view_detailed(
    scene: &Scene,
    flow: &FlowField,
    t: i64,
    n: i64,
    camera: &Camera,
    config: &RenderConfig,
) -> Result<ViewRender, RenderError> {
    if n <= 0 {
        return Err(RenderError::ZeroLoopLength);
    }
    if t < 0 || t > n {
        return Err(RenderError::TimeOutOfRange { t, n });
    }
    if flow.dims() != (scene.width, scene.height) {
        return Err(RenderError::Dimensions(
            scene.width,
            scene.height,
            flow.width(),
            flow.height(),
        ));
    }
    camera.validate()?;
    let forward = render_displaced(scene, flow, t as usize, Direction::Forward, camera, &config.splat)?;
    let backward = render_displaced(scene, flow, (n - t) as usize, Direction::Backward, camera, &config.splat)?;
    let weights = blend_weights(&forward, &backward, t, n, config.sharpness)?;
    let blended = composite(&forward, &backward, &weights, &config.hole_fill)?;
    Ok(ViewRender {
        frame: Frame {
            color: blended.color,
            depth: blended.depth,
            time_index: t,
            camera: *camera,
            holes: blended.holes,
        },
        forward,
        backward,
        weights,
    })
}

/// Renders frame `t` of an `n`-frame loop from `camera`.
pub fn render_view(
    scene: &Scene,
    flow: &FlowField,
    t: i64,
    n: i64,
    camera: &Camera,
    config: &RenderConfig,
) -> Result<Frame, RenderError> {
    render_view_detailed(scene, flow, t, n, camera, config).map(|v| v.frame)
}
