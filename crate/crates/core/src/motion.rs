//! Eulerian motion: building the per-pixel velocity field and integrating it
//! into cumulative displacement fields.
//!
//! The velocity field `M` is time invariant: every frame step moves a pixel
//! by `M` sampled at wherever the pixel currently is. Integrating that for
//! `t` steps from the source frame gives the displacement `F(0→t)`.
//! Integrating `−M` instead gives the backward field used for the second
//! animation direction.

use serde::{Deserialize, Serialize};

use crate::diffusion::{self, CellKind, SolverConfig};
use crate::error::MotionError;
use crate::grid::{FlowField, Grid, MaskImage};
use crate::par;

/// Solver settings used when none are given: 20000 sweeps, 1e-5 tolerance.
pub const DEFAULT_HINT_SOLVER: SolverConfig = SolverConfig::new(20_000, 1e-5);

/// A sparse velocity constraint, in pixels and pixels per frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowHint {
    pub x: f32,
    pub y: f32,
    pub dx: f32,
    pub dy: f32,
}

/// The hints JSON document shared by the CLI and the HTTP service.
///
/// `mask` is a path to a PNG (or a `data:image/png;base64,` URL when sent
/// over HTTP). A missing mask animates the whole frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintsDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    pub hints: Vec<FlowHint>,
    #[serde(default = "default_speed")]
    pub speed: f32,
}

fn default_speed() -> f32 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Cumulative displacement from the source frame. `time_index` is negative
/// for backward fields.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    pub field: Grid<[f32; 2]>,
    pub time_index: i64,
}

impl DisplacementField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            field: Grid::filled(width, height, [0.0; 2]),
            time_index: 0,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.field.dims()
    }
}

/// Dense field produced from hints, with solver diagnostics.
#[derive(Clone, Debug)]
pub struct MotionEstimate {
    pub flow: FlowField,
    pub iterations: usize,
    pub converged: bool,
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    // exact when a == b, so sampling a constant field returns the constant
    a + (b - a) * t
}

/// Bilinear sample of a two-channel grid at a continuous position.
/// Coordinates outside the grid are clamped to the edge.
#[inline]
pub fn sample_bilinear(field: &Grid<[f32; 2]>, x: f64, y: f64) -> [f64; 2] {
    let (w, h) = field.dims();
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let a = field.get(x0, y0);
    let b = field.get(x1, y0);
    let c = field.get(x0, y1);
    let d = field.get(x1, y1);
    let mut out = [0.0; 2];
    for k in 0..2 {
        let top = lerp(a[k] as f64, b[k] as f64, fx);
        let bottom = lerp(c[k] as f64, d[k] as f64, fx);
        out[k] = lerp(top, bottom, fy);
    }
    out
}

/// Integrates `M` (or `−M` for [`Direction::Backward`]) for `steps` frame
/// steps from every source pixel.
pub fn euler_integrate(flow: &FlowField, steps: usize, direction: Direction) -> DisplacementField {
    let (w, h) = flow.dims();
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let time_index = sign as i64 * steps as i64;
    if steps == 0 {
        return DisplacementField::zeros(w, h);
    }
    let mut data = vec![[0f32; 2]; w * h];
    par::for_each_row(&mut data, w, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            let (mut u, mut v) = (0.0f64, 0.0f64);
            for _ in 0..steps {
                let m = sample_bilinear(flow, x as f64 + u, y as f64 + v);
                u += sign * m[0];
                v += sign * m[1];
            }
            *out = [u as f32, v as f32];
        }
    });
    DisplacementField {
        field: Grid::from_vec(w, h, data),
        time_index,
    }
}

/// Multiplies every vector by `speed`.
pub fn scale_flow(flow: &FlowField, speed: f32) -> Result<FlowField, MotionError> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(MotionError::InvalidSpeed(speed));
    }
    Ok(flow.map(|&[u, v]| [u * speed, v * speed]))
}

/// Densifies sparse hints into a smooth velocity field over `mask`.
///
/// Each component is harmonic on the mask, equals the hint value at each
/// hint's nearest pixel, and is held at zero on the ring of unmasked pixels
/// around the mask. Outside the mask the field is zero. Hints that snap to
/// the same pixel are averaged.
pub fn estimate_motion_from_hints(
    mask: &MaskImage,
    hints: &[FlowHint],
    size: (usize, usize),
    solver: &SolverConfig,
) -> Result<MotionEstimate, MotionError> {
    let (w, h) = size;
    if mask.dims() != size {
        return Err(MotionError::MaskDimensions {
            got_w: mask.width(),
            got_h: mask.height(),
            want_w: w,
            want_h: h,
        });
    }
    if hints.is_empty() {
        return Err(MotionError::NoHints);
    }
    if mask.count() == 0 {
        return Err(MotionError::EmptyMask);
    }

    let mut kinds: Vec<CellKind> = mask
        .iter()
        .map(|&m| if m { CellKind::Free } else { CellKind::Fixed })
        .collect();
    let mut values = vec![[0.0f64; 2]; w * h];
    let mut hint_count = vec![0u32; w * h];
    for (index, hint) in hints.iter().enumerate() {
        if ![hint.x, hint.y, hint.dx, hint.dy].iter().all(|v| v.is_finite()) {
            return Err(MotionError::NonFiniteHint { index });
        }
        let (px, py) = (hint.x.round(), hint.y.round());
        if px < 0.0 || py < 0.0 || px >= w as f32 || py >= h as f32 {
            return Err(MotionError::HintOutsideImage {
                index,
                x: hint.x,
                y: hint.y,
            });
        }
        let i = py as usize * w + px as usize;
        if !mask.as_slice()[i] {
            return Err(MotionError::HintOutsideMask {
                index,
                x: hint.x,
                y: hint.y,
            });
        }
        kinds[i] = CellKind::Fixed;
        values[i][0] += hint.dx as f64;
        values[i][1] += hint.dy as f64;
        hint_count[i] += 1;
    }
    for (v, &n) in values.iter_mut().zip(&hint_count) {
        if n > 1 {
            v[0] /= n as f64;
            v[1] /= n as f64;
        }
    }

    let report = diffusion::solve(w, h, &kinds, &mut values, solver);
    let data = values
        .iter()
        .zip(mask.iter())
        .map(|(v, &m)| if m { [v[0] as f32, v[1] as f32] } else { [0.0; 2] })
        .collect();
    Ok(MotionEstimate {
        flow: Grid::from_vec(w, h, data),
        iterations: report.iterations,
        converged: report.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Pointwise Euler recursion for one pixel, with its own bilinear
    /// weights and edge clamp.
    fn scalar_reference(flow: &FlowField, x0: usize, y0: usize, steps: usize, sign: f64) -> (f64, f64) {
        let (w, h) = flow.dims();
        let sample = |px: f64, py: f64| {
            let px = px.max(0.0).min((w - 1) as f64);
            let py = py.max(0.0).min((h - 1) as f64);
            let ix = px.floor() as usize;
            let iy = py.floor() as usize;
            let jx = if ix + 1 < w { ix + 1 } else { ix };
            let jy = if iy + 1 < h { iy + 1 } else { iy };
            let ax = px - ix as f64;
            let ay = py - iy as f64;
            let mut out = [0.0f64; 2];
            for (k, o) in out.iter_mut().enumerate() {
                *o = (1.0 - ax) * (1.0 - ay) * flow.get(ix, iy)[k] as f64
                    + ax * (1.0 - ay) * flow.get(jx, iy)[k] as f64
                    + (1.0 - ax) * ay * flow.get(ix, jy)[k] as f64
                    + ax * ay * flow.get(jx, jy)[k] as f64;
            }
            out
        };
        let (mut u, mut v) = (0.0, 0.0);
        for _ in 0..steps {
            let m = sample(x0 as f64 + u, y0 as f64 + v);
            u += sign * m[0];
            v += sign * m[1];
        }
        (u, v)
    }

    #[test]
    fn constant_field_integrates_linearly() {
        let m = Grid::filled(6, 5, [1.5f32, 0.0]);
        let f = euler_integrate(&m, 4, Direction::Forward);
        assert_eq!(f.time_index, 4);
        assert!(f.field.iter().all(|&d| d == [6.0, 0.0]));
    }

    #[test]
    fn zero_steps_is_zero_field() {
        let m = Grid::from_fn(4, 4, |x, y| [x as f32, -(y as f32)]);
        for dir in [Direction::Forward, Direction::Backward] {
            let f = euler_integrate(&m, 0, dir);
            assert_eq!(f.time_index, 0);
            assert!(f.field.iter().all(|&d| d == [0.0, 0.0]));
        }
    }

    #[test]
    fn backward_negates_constant_field() {
        let m = Grid::filled(5, 3, [1.0f32, 0.0]);
        let f = euler_integrate(&m, 3, Direction::Backward);
        assert_eq!(f.time_index, -3);
        assert!(f.field.iter().all(|&d| d == [-3.0, 0.0]));
    }

    #[test]
    fn piecewise_field_stalls_at_boundary() {
        let m = Grid::from_fn(8, 1, |x, _| if x < 4 { [1.0f32, 0.0] } else { [0.0, 0.0] });
        let f = euler_integrate(&m, 4, Direction::Forward);
        let expected = scalar_reference(&m, 2, 0, 4, 1.0);
        assert_eq!(expected, (2.0, 0.0));
        assert_eq!(*f.field.get(2, 0), [2.0, 0.0]);
    }

    #[test]
    fn matches_scalar_reference_on_smooth_field() {
        let m = Grid::from_fn(13, 9, |x, y| {
            let (xf, yf) = (x as f32, y as f32);
            [(0.7 * xf).sin() * 1.3 + 0.2, (0.4 * yf + 0.3 * xf).cos() * 0.9]
        });
        for dir in [Direction::Forward, Direction::Backward] {
            let sign = if dir == Direction::Forward { 1.0 } else { -1.0 };
            let f = euler_integrate(&m, 11, dir);
            for y in 0..9 {
                for x in 0..13 {
                    let (u, v) = scalar_reference(&m, x, y, 11, sign);
                    let got = f.field.get(x, y);
                    assert!((got[0] as f64 - u).abs() <= 1e-5 && (got[1] as f64 - v).abs() <= 1e-5);
                }
            }
        }
    }

    #[test]
    fn scale_flow_rules() {
        let m = Grid::filled(2, 2, [2.0f32, 0.0]);
        assert_eq!(scale_flow(&m, 1.0).unwrap(), m);
        assert!(scale_flow(&m, 0.5).unwrap().iter().all(|&v| v == [1.0, 0.0]));
        assert_eq!(scale_flow(&m, 0.0), Err(MotionError::InvalidSpeed(0.0)));
        assert!(scale_flow(&m, f32::NAN).is_err());
    }

    fn hint(x: f32, y: f32, dx: f32, dy: f32) -> FlowHint {
        FlowHint { x, y, dx, dy }
    }

    #[test]
    fn single_hint_on_full_mask_is_constant() {
        let mask = Grid::filled(9, 7, true);
        let est = estimate_motion_from_hints(&mask, &[hint(3.2, 4.0, 2.0, 0.0)], (9, 7), &DEFAULT_HINT_SOLVER).unwrap();
        assert!(est.converged);
        for v in est.flow.iter() {
            assert!((v[0] - 2.0).abs() < 1e-4 && v[1].abs() < 1e-6, "{v:?}");
        }
    }

    #[test]
    fn strip_between_hints_is_linear() {
        let mask = Grid::filled(8, 1, true);
        let hints = [hint(0.0, 0.0, 0.0, 0.0), hint(7.0, 0.0, 7.0, 0.0)];
        let solver = SolverConfig::new(20_000, 1e-9);
        let est = estimate_motion_from_hints(&mask, &hints, (8, 1), &solver).unwrap();
        for (x, v) in est.flow.iter().enumerate() {
            assert!((v[0] - x as f32).abs() < 1e-4, "x={x} got {}", v[0]);
        }
    }

    #[test]
    fn motion_vanishes_outside_mask_and_rings() {
        let mask = Grid::from_fn(10, 10, |x, y| (2..8).contains(&x) && (2..8).contains(&y));
        let est = estimate_motion_from_hints(&mask, &[hint(5.0, 5.0, 1.0, -1.0)], (10, 10), &DEFAULT_HINT_SOLVER).unwrap();
        for y in 0..10 {
            for x in 0..10 {
                let v = est.flow.get(x, y);
                if !mask.get(x, y) {
                    assert_eq!(*v, [0.0, 0.0]);
                } else {
                    assert!(v[0] >= 0.0 && v[0] <= 1.0 && v[1] <= 0.0 && v[1] >= -1.0);
                }
            }
        }
        assert_eq!(*est.flow.get(5, 5), [1.0, -1.0]);
        assert!(est.flow.get(2, 5)[0] < est.flow.get(4, 5)[0]);
    }

    #[test]
    fn hint_errors() {
        let mask = Grid::from_fn(4, 4, |x, _| x < 2);
        let s = &DEFAULT_HINT_SOLVER;
        assert_eq!(estimate_motion_from_hints(&mask, &[], (4, 4), s).unwrap_err(), MotionError::NoHints);
        let empty = Grid::filled(4, 4, false);
        assert_eq!(
            estimate_motion_from_hints(&empty, &[hint(0.0, 0.0, 1.0, 0.0)], (4, 4), s).unwrap_err(),
            MotionError::EmptyMask
        );
        assert!(matches!(
            estimate_motion_from_hints(&mask, &[hint(3.0, 0.0, 1.0, 0.0)], (4, 4), s),
            Err(MotionError::HintOutsideMask { index: 0, .. })
        ));
        assert!(matches!(
            estimate_motion_from_hints(&mask, &[hint(1.0, 7.0, 1.0, 0.0)], (4, 4), s),
            Err(MotionError::HintOutsideImage { index: 0, .. })
        ));
        assert!(matches!(
            estimate_motion_from_hints(&mask, &[hint(0.0, 0.0, f32::NAN, 0.0)], (4, 4), s),
            Err(MotionError::NonFiniteHint { index: 0 })
        ));
        assert_eq!(MotionError::EmptyMask.to_string(), "no animation region: mask is empty");
    }

    #[test]
    fn duplicate_hints_are_averaged() {
        let mask = Grid::filled(3, 1, true);
        let hints = [hint(1.0, 0.0, 1.0, 0.0), hint(1.2, 0.1, 3.0, 0.0)];
        let est = estimate_motion_from_hints(&mask, &hints, (3, 1), &DEFAULT_HINT_SOLVER).unwrap();
        assert_eq!(est.flow.get(1, 0)[0], 2.0);
    }

    #[test]
    fn hints_document_parses() {
        let doc: HintsDocument =
            serde_json::from_str(r#"{"mask":"m.png","hints":[{"x":1,"y":2,"dx":0.5,"dy":0}],"speed":2}"#).unwrap();
        assert_eq!(doc.hints[0], hint(1.0, 2.0, 0.5, 0.0));
        assert_eq!(doc.speed, 2.0);
        let doc: HintsDocument = serde_json::from_str(r#"{"hints":[]}"#).unwrap();
        assert_eq!(doc.speed, 1.0);
        assert!(serde_json::from_str::<HintsDocument>(r#"{"hints":[],"bogus":1}"#).is_err());
    }
}
