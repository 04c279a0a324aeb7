//! Layered scene construction.
//!
//! Depth values are clustered into a few intervals, the image is split into
//! one layer per interval, each layer's disoccluded band is filled by
//! harmonic diffusion, and every valid layer pixel becomes a colored 3D
//! point. Displacement fields are lifted into per-point 3D translations at
//! constant depth.

use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::assets::{self, DEPTH_MIN};
use crate::camera::{Camera, Intrinsics};
use crate::diffusion::{self, CellKind, SolverConfig};
use crate::error::{AssetError, SceneError};
use crate::grid::{ColorImage, DepthMap, Grid, MaskImage, Rgb};
use crate::motion::{sample_bilinear, DisplacementField};
use crate::par;

/// Fill solver for disoccluded layer pixels: 5000 sweeps, 1e-4 tolerance.
pub const INPAINT_SOLVER: SolverConfig = SolverConfig::new(5_000, 1e-4);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthInterval {
    pub low: f32,
    pub high: f32,
}

impl DepthInterval {
    pub fn contains(&self, d: f32) -> bool {
        self.low <= d && d <= self.high
    }
}

/// Disjoint depth ranges sorted near to far, plus the absolute gap
/// threshold that separated them.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthIntervals {
    pub intervals: Vec<DepthInterval>,
    pub gap: f32,
}

impl DepthIntervals {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Index of the interval holding `d`. A value on a shared boundary goes
    /// to the nearer interval; a value in no interval goes to the closest.
    pub fn index_of(&self, d: f32) -> usize {
        if let Some(i) = self.intervals.iter().position(|iv| iv.contains(d)) {
            return i;
        }
        let dist = |iv: &DepthInterval| (iv.low - d).max(d - iv.high).max(0.0);
        self.intervals
            .iter()
            .enumerate()
            .min_by(|a, b| dist(a.1).total_cmp(&dist(b.1)))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Sorted-gap single-linkage clustering of depth values.
///
/// Consecutive sorted unique depths further apart than
/// `gap_threshold · (d_max − d_min)` start a new cluster; if that yields more
/// than `max_layers` clusters, the closest neighboring clusters are merged
/// (nearest-depth pair first on ties) until it does not.
pub fn cluster_depth(
    depth: &DepthMap,
    gap_threshold: f64,
    max_layers: usize,
) -> Result<DepthIntervals, SceneError> {
    if !(gap_threshold > 0.0 && gap_threshold < 1.0) {
        return Err(SceneError::GapThreshold(gap_threshold));
    }
    if max_layers == 0 {
        return Err(SceneError::ZeroLayers);
    }
    let mut values: Vec<f32> = depth.as_slice().to_vec();
    values.sort_unstable_by(f32::total_cmp);
    values.dedup();
    if values.is_empty() {
        return Ok(DepthIntervals {
            intervals: vec![],
            gap: 0.0,
        });
    }
    let range = (values[values.len() - 1] - values[0]) as f64;
    let gap = gap_threshold * range;

    // clusters as inclusive index ranges into `values`
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..values.len() {
        if (values[i] - values[i - 1]) as f64 > gap {
            clusters.push((start, i - 1));
            start = i;
        }
    }
    clusters.push((start, values.len() - 1));

    while clusters.len() > max_layers {
        let (k, _) = clusters
            .windows(2)
            .enumerate()
            .map(|(k, pair)| (k, values[pair[1].0] - values[pair[0].1]))
            .fold((0, f32::INFINITY), |best, cand| if cand.1 < best.1 { cand } else { best });
        clusters[k].1 = clusters[k + 1].1;
        clusters.remove(k + 1);
    }

    Ok(DepthIntervals {
        intervals: clusters
            .into_iter()
            .map(|(a, b)| DepthInterval {
                low: values[a],
                high: values[b],
            })
            .collect(),
        gap: gap as f32,
    })
}

/// One layer of a layered depth image.
#[derive(Clone, Debug)]
pub struct LdiLayer {
    pub color: ColorImage,
    /// Zero where the layer is not valid.
    pub depth: DepthMap,
    pub valid: MaskImage,
    /// Pixels that were filled rather than observed. Always a subset of `valid`.
    pub inpainted: MaskImage,
    pub interval: DepthInterval,
    /// Allowed overshoot of inpainted depth beyond `interval`.
    pub slack: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Original,
    Inpainted,
}

impl LdiLayer {
    pub fn origin(&self, x: usize, y: usize) -> Option<Origin> {
        match (*self.valid.get(x, y), *self.inpainted.get(x, y)) {
            (false, _) => None,
            (true, false) => Some(Origin::Original),
            (true, true) => Some(Origin::Inpainted),
        }
    }

    pub fn original_mask(&self) -> MaskImage {
        Grid::from_vec(
            self.valid.width(),
            self.valid.height(),
            self.valid
                .iter()
                .zip(self.inpainted.iter())
                .map(|(&v, &i)| v && !i)
                .collect(),
        )
    }
}

/// Partitions pixels by depth interval. Layers come back far to near.
pub fn build_ldi(color: &ColorImage, depth: &DepthMap, intervals: &DepthIntervals) -> Vec<LdiLayer> {
    let (w, h) = color.dims();
    let assignment: Vec<usize> = depth.iter().map(|&d| intervals.index_of(d)).collect();
    (0..intervals.len())
        .rev()
        .map(|l| {
            let valid = Grid::from_vec(w, h, assignment.iter().map(|&a| a == l).collect());
            let layer_color = Grid::from_vec(
                w,
                h,
                color
                    .iter()
                    .zip(valid.iter())
                    .map(|(&c, &v)| if v { c } else { [0.0; 3] })
                    .collect(),
            );
            let layer_depth = Grid::from_vec(
                w,
                h,
                depth
                    .iter()
                    .zip(valid.iter())
                    .map(|(&d, &v)| if v { d } else { 0.0 })
                    .collect(),
            );
            LdiLayer {
                color: layer_color,
                depth: layer_depth,
                valid,
                inpainted: Grid::filled(w, h, false),
                interval: intervals.intervals[l],
                slack: intervals.gap,
            }
        })
        .collect()
}

/// Fills the part of `occluded` within `band_px` of the layer's valid pixels
/// by harmonic diffusion of color and depth from the adjacent valid pixels.
/// Original pixels are never modified. Regions with no valid neighbor stay
/// empty.
pub fn inpaint_layer(layer: &LdiLayer, occluded: &MaskImage, band_px: usize) -> LdiLayer {
    let (w, h) = layer.valid.dims();
    let band = layer.valid.dilate(band_px);
    let kinds: Vec<CellKind> = (0..w * h)
        .map(|i| {
            if layer.valid.as_slice()[i] {
                CellKind::Fixed
            } else if occluded.as_slice()[i] && band.as_slice()[i] {
                CellKind::Free
            } else {
                CellKind::Excluded
            }
        })
        .collect();
    let mut out = layer.clone();
    if !kinds.contains(&CellKind::Free) {
        return out;
    }
    let mut values: Vec<[f64; 4]> = (0..w * h)
        .map(|i| {
            let c = layer.color.as_slice()[i];
            [c[0] as f64, c[1] as f64, c[2] as f64, layer.depth.as_slice()[i] as f64]
        })
        .collect();
    let report = diffusion::solve(w, h, &kinds, &mut values, &INPAINT_SOLVER);
    if !report.unreachable.is_empty() {
        log::debug!("{} disoccluded pixels have no valid neighbor", report.unreachable.len());
    }
    if !report.converged {
        log::debug!("inpainting stopped at max update {:e}", report.max_update);
    }
    let lo = (layer.interval.low - layer.slack).max(DEPTH_MIN);
    let hi = layer.interval.high + layer.slack;
    let mut unreachable = report.unreachable.iter().peekable();
    for (i, kind) in kinds.iter().enumerate() {
        if *kind != CellKind::Free {
            continue;
        }
        if unreachable.peek() == Some(&&i) {
            unreachable.next();
            continue;
        }
        let v = values[i];
        out.color.as_mut_slice()[i] = [
            (v[0] as f32).clamp(0.0, 1.0),
            (v[1] as f32).clamp(0.0, 1.0),
            (v[2] as f32).clamp(0.0, 1.0),
        ];
        out.depth.as_mut_slice()[i] = (v[3] as f32).clamp(lo, hi);
        out.valid.as_mut_slice()[i] = true;
        out.inpainted.as_mut_slice()[i] = true;
    }
    out
}

/// A colored point with its provenance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenePoint {
    pub position: Point3<f64>,
    pub color: Rgb,
    pub layer: u16,
    pub pixel: (u32, u32),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<ScenePoint>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Lifts every valid pixel of every layer to 3D, in layer order then
/// row-major pixel order.
pub fn unproject(layers: &[LdiLayer], camera: &Camera) -> Result<PointCloud, SceneError> {
    camera.validate()?;
    let k = &camera.intrinsics;
    let r_t = camera.rotation.transpose();
    let mut points = Vec::with_capacity(layers.iter().map(|l| l.valid.count()).sum());
    for (l, layer) in layers.iter().enumerate() {
        let (w, h) = layer.valid.dims();
        for y in 0..h {
            for x in 0..w {
                if !*layer.valid.get(x, y) {
                    continue;
                }
                let d = *layer.depth.get(x, y);
                if !(d > 0.0 && d.is_finite()) {
                    return Err(SceneError::NonPositiveDepth { x, y, depth: d });
                }
                let cam = k.unproject(x as f64, y as f64, d as f64);
                points.push(ScenePoint {
                    position: Point3::from(r_t * (cam - camera.translation)),
                    color: *layer.color.get(x, y),
                    layer: l as u16,
                    pixel: (x as u32, y as u32),
                });
            }
        }
    }
    Ok(PointCloud { points })
}

/// Per-point 3D translations, ordered like the cloud they were lifted for.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneFlow {
    pub vectors: Vec<Vector3<f64>>,
    pub time_index: i64,
}

/// Lifts a 2D displacement field to 3D: each point moves to the
/// back-projection of its displaced pixel at its own (unchanged) depth.
pub fn lift_flow(field: &DisplacementField, cloud: &PointCloud, camera: &Camera) -> SceneFlow {
    let k = &camera.intrinsics;
    let r_t = camera.rotation.transpose();
    let vectors = par::map_slice(&cloud.points, |p| {
        let (px, py) = (p.pixel.0 as f64, p.pixel.1 as f64);
        let u = sample_bilinear(&field.field, px, py);
        if u == [0.0, 0.0] {
            return Vector3::zeros();
        }
        let d = camera.world_to_camera(&p.position).z;
        let moved = k.unproject(px + u[0], py + u[1], d) - k.unproject(px, py, d);
        r_t * moved
    });
    SceneFlow {
        vectors,
        time_index: field.time_index,
    }
}

/// Moves each point by its translation.
pub fn displace(cloud: &PointCloud, flow: &SceneFlow) -> Result<PointCloud, SceneError> {
    if cloud.len() != flow.vectors.len() {
        return Err(SceneError::LengthMismatch {
            points: cloud.len(),
            vectors: flow.vectors.len(),
        });
    }
    let points = cloud
        .points
        .iter()
        .zip(&flow.vectors)
        .map(|(p, t)| ScenePoint {
            position: p.position + t,
            ..*p
        })
        .collect();
    Ok(PointCloud { points })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneConfig {
    /// Depth gap, as a fraction of the depth range, that separates layers.
    pub gap_threshold: f64,
    pub max_layers: usize,
    /// Width of the disocclusion band filled behind nearer layers.
    pub band_px: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            gap_threshold: 0.12,
            max_layers: 4,
            band_px: 16,
        }
    }
}

/// The immutable, motion-independent part of a job.
#[derive(Clone, Debug)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub intrinsics: Intrinsics,
    pub intervals: DepthIntervals,
    /// Far to near.
    pub layers: Vec<LdiLayer>,
    pub cloud: PointCloud,
}

impl Scene {
    pub fn source_camera(&self) -> Camera {
        Camera::source(self.intrinsics)
    }

    /// Median of the observed depths.
    pub fn median_depth(&self) -> f64 {
        let mut d: Vec<f32> = self
            .layers
            .iter()
            .flat_map(|l| l.original_mask().into_vec().into_iter().zip(l.depth.iter().copied()))
            .filter_map(|(m, d)| m.then_some(d))
            .collect();
        median(&mut d)
    }
}

pub(crate) fn median(values: &mut [f32]) -> f64 {
    if values.is_empty() {
        return 1.0;
    }
    let mid = values.len() / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, f32::total_cmp);
    *m as f64
}

/// Clusters, layers, inpaints and unprojects.
pub fn build_scene(
    color: &ColorImage,
    depth: &DepthMap,
    intrinsics: Intrinsics,
    config: &SceneConfig,
) -> Result<Scene, SceneError> {
    if !color.same_dims(depth) {
        return Err(SceneError::Dimensions(
            color.width(),
            color.height(),
            depth.width(),
            depth.height(),
        ));
    }
    let (w, h) = color.dims();
    let intervals = cluster_depth(depth, config.gap_threshold, config.max_layers)?;
    let layers = build_ldi(color, depth, &intervals);

    // a pixel is occluded in layer l when some nearer layer (later index) owns it
    let mut occluders: Vec<MaskImage> = vec![Grid::filled(w, h, false); layers.len()];
    let mut nearer = Grid::filled(w, h, false);
    for l in (0..layers.len()).rev() {
        occluders[l] = nearer.clone();
        for (n, &v) in nearer.as_mut_slice().iter_mut().zip(layers[l].valid.iter()) {
            *n |= v;
        }
    }
    let indices: Vec<usize> = (0..layers.len()).collect();
    let layers = par::map_slice(&indices, |&l| inpaint_layer(&layers[l], &occluders[l], config.band_px));

    let cloud = unproject(&layers, &Camera::source(intrinsics))?;
    Ok(Scene {
        width: w,
        height: h,
        intrinsics,
        intervals,
        layers,
        cloud,
    })
}

/// Writes `layer_{i}_color.png`, `layer_{i}_depth.pfm` and
/// `layer_{i}_valid.png` for every layer.
pub fn dump_layers(scene: &Scene, dir: &Path) -> Result<(), AssetError> {
    for (i, layer) in scene.layers.iter().enumerate() {
        assets::save_frame(&layer.color, dir.join(format!("layer_{i}_color.png")))?;
        assets::save_pfm(&layer.depth, dir.join(format!("layer_{i}_depth.pfm")))?;
        assets::save_mask(&layer.valid, dir.join(format!("layer_{i}_valid.png")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn depth_row(values: &[f32]) -> DepthMap {
        Grid::from_vec(values.len(), 1, values.to_vec())
    }

    fn bounds(iv: &DepthIntervals) -> Vec<(f32, f32)> {
        iv.intervals.iter().map(|i| (i.low, i.high)).collect()
    }

    #[test]
    fn clusters_split_at_large_gap() {
        let iv = cluster_depth(&depth_row(&[1.0, 1.1, 5.0, 5.2]), 0.2, 4).unwrap();
        assert_eq!(bounds(&iv), vec![(1.0, 1.1), (5.0, 5.2)]);
    }

    #[test]
    fn constant_depth_is_one_interval() {
        let iv = cluster_depth(&Grid::filled(3, 3, 2.5), 0.12, 4).unwrap();
        assert_eq!(bounds(&iv), vec![(2.5, 2.5)]);
    }

    #[test]
    fn layer_cap_merges_smallest_gaps() {
        let iv = cluster_depth(&depth_row(&[1.0, 2.0, 3.0, 4.5]), 0.1, 2).unwrap();
        assert_eq!(bounds(&iv), vec![(1.0, 3.0), (4.5, 4.5)]);
        // equal gaps: the nearest pair merges first
        let iv = cluster_depth(&depth_row(&[1.0, 2.0, 3.0, 4.0]), 0.1, 2).unwrap();
        assert_eq!(bounds(&iv), vec![(1.0, 3.0), (4.0, 4.0)]);
    }

    #[test]
    fn cluster_argument_errors() {
        let d = depth_row(&[1.0]);
        assert_eq!(cluster_depth(&d, 0.0, 4), Err(SceneError::GapThreshold(0.0)));
        assert_eq!(cluster_depth(&d, 1.0, 4), Err(SceneError::GapThreshold(1.0)));
        assert_eq!(cluster_depth(&d, 0.5, 0), Err(SceneError::ZeroLayers));
    }

    #[test]
    fn ldi_partitions_far_first() {
        let color = Grid::from_fn(2, 2, |x, y| [x as f32, y as f32, 0.5]);
        let depth = Grid::from_vec(2, 2, vec![1.0, 1.0, 5.0, 5.0]);
        let iv = cluster_depth(&depth, 0.5, 4).unwrap();
        let layers = build_ldi(&color, &depth, &iv);
        assert_eq!(layers.len(), 2);
        assert_eq!(layers[0].valid.as_slice(), &[false, false, true, true]);
        assert_eq!(layers[1].valid.as_slice(), &[true, true, false, false]);
        assert_eq!(*layers[0].color.get(0, 1), [0.0, 1.0, 0.5]);
        assert_eq!(*layers[0].depth.get(0, 0), 0.0);
    }

    #[test]
    fn single_interval_layer_equals_input() {
        let color = Grid::from_fn(3, 2, |x, y| [x as f32 / 3.0, y as f32 / 2.0, 0.1]);
        let depth = Grid::from_fn(3, 2, |x, _| 1.0 + x as f32 * 0.01);
        let iv = cluster_depth(&depth, 0.9, 4).unwrap();
        let layers = build_ldi(&color, &depth, &iv);
        assert_eq!(layers.len(), 1);
        assert_eq!(layers[0].color, color);
        assert_eq!(layers[0].depth, depth);
        assert_eq!(layers[0].valid.count(), 6);
    }

    #[test]
    fn boundary_depth_goes_to_nearer_interval() {
        let iv = DepthIntervals {
            intervals: vec![
                DepthInterval { low: 1.0, high: 2.0 },
                DepthInterval { low: 2.0, high: 3.0 },
            ],
            gap: 0.1,
        };
        assert_eq!(iv.index_of(2.0), 0);
        assert_eq!(iv.index_of(2.5), 1);
        assert_eq!(iv.index_of(9.0), 1);
    }

    fn hole_layer(w: usize, h: usize, hole: impl Fn(usize, usize) -> bool, color: Rgb, depth: f32) -> (LdiLayer, MaskImage) {
        let valid = Grid::from_fn(w, h, |x, y| !hole(x, y));
        let layer = LdiLayer {
            color: Grid::from_fn(w, h, |x, y| if hole(x, y) { [0.0; 3] } else { color }),
            depth: Grid::from_fn(w, h, |x, y| if hole(x, y) { 0.0 } else { depth }),
            inpainted: Grid::filled(w, h, false),
            valid,
            interval: DepthInterval { low: depth, high: depth },
            slack: 0.5,
        };
        (layer, Grid::from_fn(w, h, hole))
    }

    #[test]
    fn constant_surround_fills_exactly() {
        let (layer, occ) = hole_layer(8, 8, |x, y| (3..5).contains(&x) && (2..6).contains(&y), [0.2, 0.4, 0.6], 3.0);
        let out = inpaint_layer(&layer, &occ, 4);
        for y in 2..6 {
            for x in 3..5 {
                assert_eq!(out.origin(x, y), Some(Origin::Inpainted));
                let c = out.color.get(x, y);
                assert!((c[0] - 0.2).abs() < 1e-5 && (c[1] - 0.4).abs() < 1e-5 && (c[2] - 0.6).abs() < 1e-5);
                assert!((out.depth.get(x, y) - 3.0).abs() < 1e-5);
            }
        }
        assert_eq!(out.origin(0, 0), Some(Origin::Original));
        assert_eq!(out.original_mask(), layer.valid);
    }

    #[test]
    fn strip_hole_fills_with_ramp() {
        let w = 10;
        let mut layer = hole_layer(w, 1, |x, _| (1..9).contains(&x), [0.0; 3], 2.0).0;
        layer.color.set(9, 0, [0.9, 0.0, 0.0]);
        layer.depth.set(9, 0, 2.9);
        layer.interval = DepthInterval { low: 2.0, high: 2.9 };
        let occ = Grid::from_fn(w, 1, |x, _| (1..9).contains(&x));
        let out = inpaint_layer(&layer, &occ, 16);
        for x in 0..w {
            let t = x as f32 / 9.0;
            assert!((out.color.get(x, 0)[0] - 0.9 * t).abs() < 2e-3, "x={x}");
            assert!((out.depth.get(x, 0) - (2.0 + 0.9 * t)).abs() < 2e-3, "x={x}");
        }
    }

    #[test]
    fn zero_band_leaves_layer_unchanged() {
        let (layer, occ) = hole_layer(6, 6, |x, _| x > 2, [0.5; 3], 1.0);
        let out = inpaint_layer(&layer, &occ, 0);
        assert_eq!(out.valid, layer.valid);
        assert_eq!(out.color, layer.color);
    }

    #[test]
    fn band_limits_fill_distance() {
        let (layer, occ) = hole_layer(12, 1, |x, _| x >= 2, [0.5; 3], 1.0);
        let out = inpaint_layer(&layer, &occ, 3);
        let filled: Vec<bool> = out.valid.iter().copied().collect();
        assert_eq!(&filled[..5], &[true; 5]);
        assert!(filled[5..].iter().all(|v| !v));
    }

    #[test]
    fn isolated_target_stays_empty() {
        // the occluded area is disconnected from valid pixels by non-target pixels
        let valid_x = 0;
        let layer = LdiLayer {
            color: Grid::filled(6, 1, [0.3; 3]),
            depth: Grid::from_fn(6, 1, |x, _| if x == valid_x { 1.0 } else { 0.0 }),
            valid: Grid::from_fn(6, 1, |x, _| x == valid_x),
            inpainted: Grid::filled(6, 1, false),
            interval: DepthInterval { low: 1.0, high: 1.0 },
            slack: 0.1,
        };
        let occ = Grid::from_fn(6, 1, |x, _| x >= 3);
        let out = inpaint_layer(&layer, &occ, 8);
        assert_eq!(out.valid.count(), 1);
    }

    #[test]
    fn inpainted_depth_clamped_to_interval_slack() {
        let mut layer = hole_layer(5, 1, |x, _| x == 2, [0.5; 3], 1.0).0;
        layer.depth.set(0, 0, 1.0);
        layer.depth.set(1, 0, 1.0);
        layer.depth.set(3, 0, 9.0);
        layer.depth.set(4, 0, 9.0);
        layer.interval = DepthInterval { low: 1.0, high: 1.0 };
        layer.slack = 0.25;
        let out = inpaint_layer(&layer, &Grid::from_fn(5, 1, |x, _| x == 2), 2);
        assert_eq!(*out.depth.get(2, 0), 1.25);
    }

    #[test]
    fn unproject_pinhole() {
        let k = Intrinsics { fx: 2.0, fy: 2.0, cx: 1.0, cy: 1.0 };
        let layer = LdiLayer {
            color: Grid::filled(3, 2, [1.0, 0.0, 0.0]),
            depth: Grid::filled(3, 2, 4.0),
            valid: Grid::from_fn(3, 2, |x, y| x == 2 && y == 1),
            inpainted: Grid::filled(3, 2, false),
            interval: DepthInterval { low: 4.0, high: 4.0 },
            slack: 0.0,
        };
        let cloud = unproject(&[layer.clone()], &Camera::source(k)).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.points[0].position, Point3::new(2.0, 0.0, 4.0));
        assert_eq!(cloud.points[0].pixel, (2, 1));

        let mut bad = layer;
        bad.depth.set(2, 1, 0.0);
        assert!(matches!(
            unproject(&[bad], &Camera::source(k)),
            Err(SceneError::NonPositiveDepth { x: 2, y: 1, .. })
        ));
    }

    #[test]
    fn empty_layer_gives_empty_cloud() {
        let k = Intrinsics { fx: 1.0, fy: 1.0, cx: 0.0, cy: 0.0 };
        let layer = hole_layer(3, 3, |_, _| true, [0.0; 3], 1.0).0;
        assert!(unproject(&[layer], &Camera::source(k)).unwrap().is_empty());
    }

    fn one_point_cloud(pixel: (u32, u32), position: Point3<f64>) -> PointCloud {
        PointCloud {
            points: vec![ScenePoint {
                position,
                color: [0.5; 3],
                layer: 0,
                pixel,
            }],
        }
    }

    #[test]
    fn lift_flow_pinhole_difference() {
        let k = Intrinsics { fx: 1.0, fy: 1.0, cx: 0.0, cy: 0.0 };
        let cloud = one_point_cloud((0, 0), Point3::new(0.0, 0.0, 2.0));
        let field = DisplacementField {
            field: Grid::filled(2, 2, [1.0, 0.0]),
            time_index: 1,
        };
        let flow = lift_flow(&field, &cloud, &Camera::source(k));
        assert_eq!(flow.vectors, vec![Vector3::new(2.0, 0.0, 0.0)]);
        assert_eq!(flow.time_index, 1);

        let zero = lift_flow(&DisplacementField::zeros(2, 2), &cloud, &Camera::source(k));
        assert_eq!(zero.vectors, vec![Vector3::zeros()]);
    }

    #[test]
    fn displace_adds_and_inverts() {
        let cloud = one_point_cloud((1, 1), Point3::new(1.0, 1.0, 2.0));
        let flow = SceneFlow {
            vectors: vec![Vector3::new(0.5, 0.0, 0.0)],
            time_index: 1,
        };
        let moved = displace(&cloud, &flow).unwrap();
        assert_eq!(moved.points[0].position, Point3::new(1.5, 1.0, 2.0));
        let back = displace(
            &moved,
            &SceneFlow {
                vectors: vec![-flow.vectors[0]],
                time_index: -1,
            },
        )
        .unwrap();
        assert_eq!(back, cloud);
        let bad = SceneFlow {
            vectors: vec![],
            time_index: 0,
        };
        assert_eq!(
            displace(&cloud, &bad),
            Err(SceneError::LengthMismatch { points: 1, vectors: 0 })
        );
    }
}
