//! Discrete harmonic interpolation on a pixel grid.
//!
//! Solves the 4-neighbor Laplace equation over the `Free` cells of a grid
//! with Dirichlet values on `Fixed` cells. Image borders and `Excluded`
//! cells are not neighbors, which gives a zero-gradient (mirrored) boundary
//! there. The iteration is red-black successive over-relaxation: cells of
//! one parity only read cells of the other parity, so each half-sweep is a
//! pure function of the previous state and runs in parallel without any
//! dependence on scheduling.

use crate::grid::neighbors4;
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    /// Unknown, solved for.
    Free,
    /// Dirichlet boundary value.
    Fixed,
    /// Not part of the domain; neither solved nor read.
    Excluded,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once the largest per-cell change of a full sweep falls below this.
    pub tolerance: f64,
    /// Over-relaxation factor in `[1, 2)`. `None` picks one from the domain size.
    pub relaxation: Option<f64>,
}

impl SolverConfig {
    pub const fn new(max_iters: usize, tolerance: f64) -> Self {
        Self {
            max_iters,
            tolerance,
            relaxation: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub max_update: f64,
    pub converged: bool,
    /// Free cells with no path to any fixed cell. They keep their initial value.
    pub unreachable: Vec<usize>,
}

/// Solves in place. `values` holds the initial guess for free cells and the
/// boundary values for fixed cells; excluded cells are never touched.
pub fn solve<const C: usize>(
    width: usize,
    height: usize,
    kinds: &[CellKind],
    values: &mut [[f64; C]],
    config: &SolverConfig,
) -> SolveReport {
    assert_eq!(kinds.len(), width * height);
    assert_eq!(values.len(), width * height);

    let (anchored, unreachable, extent) = classify(width, height, kinds);
    let mut report = SolveReport {
        unreachable,
        ..SolveReport::default()
    };
    if anchored.is_empty() {
        report.converged = true;
        return report;
    }

    let omega = config
        .relaxation
        .unwrap_or_else(|| 2.0 / (1.0 + (std::f64::consts::PI / (extent as f64 + 1.0)).sin()))
        .clamp(1.0, 1.99);

    let (red, black): (Vec<usize>, Vec<usize>) = anchored
        .into_iter()
        .partition(|&i| (i % width + i / width) % 2 == 0);

    let readable = |i: usize| kinds[i] != CellKind::Excluded;
    let half_sweep = |cells: &[usize], values: &mut [[f64; C]]| -> f64 {
        let snapshot: &[[f64; C]] = values;
        let updates: Vec<([f64; C], f64)> = par::map_slice(cells, |&i| {
            let (x, y) = (i % width, i / width);
            let mut sum = [0.0; C];
            let mut count = 0usize;
            for (nx, ny) in neighbors4(x, y, width, height) {
                let j = ny * width + nx;
                if readable(j) {
                    for (s, v) in sum.iter_mut().zip(snapshot[j].iter()) {
                        *s += v;
                    }
                    count += 1;
                }
            }
            let old = snapshot[i];
            let mut new = old;
            let mut delta = 0.0f64;
            for c in 0..C {
                let mean = sum[c] / count as f64;
                new[c] = old[c] + omega * (mean - old[c]);
                delta = delta.max((new[c] - old[c]).abs());
            }
            (new, delta)
        });
        let mut max_delta = 0.0f64;
        for (&i, (new, delta)) in cells.iter().zip(updates) {
            values[i] = new;
            max_delta = max_delta.max(delta);
        }
        max_delta
    };

    // The remaining error is about update · r / (1 − r) for contraction rate
    // r, so a small update alone does not mean convergence when r is near 1.
    let mut rate = 0.0f64;
    let mut previous = f64::INFINITY;
    for iter in 1..=config.max_iters {
        let d_red = half_sweep(&red, values);
        let d_black = half_sweep(&black, values);
        let update = d_red.max(d_black);
        report.iterations = iter;
        report.max_update = update;
        if previous.is_finite() && previous > 0.0 {
            rate = 0.9 * rate + 0.1 * (update / previous).min(1.0);
        }
        previous = update;
        let remaining = if rate < 1.0 { update * rate / (1.0 - rate) } else { f64::INFINITY };
        if update < config.tolerance && remaining < config.tolerance {
            report.converged = true;
            break;
        }
    }
    report
}

/// Splits free cells into those connected to a fixed cell and those that are
/// not; also returns the largest bounding-box side among anchored components.
fn classify(width: usize, height: usize, kinds: &[CellKind]) -> (Vec<usize>, Vec<usize>, usize) {
    let n = width * height;
    let mut seen = vec![false; n];
    let mut anchored = Vec::new();
    let mut unreachable = Vec::new();
    let mut extent = 1usize;
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..n {
        if kinds[start] != CellKind::Free || seen[start] {
            continue;
        }
        component.clear();
        seen[start] = true;
        stack.push(start);
        let mut touches_fixed = false;
        let (mut x0, mut x1, mut y0, mut y1) = (usize::MAX, 0, usize::MAX, 0);
        while let Some(i) = stack.pop() {
            component.push(i);
            let (x, y) = (i % width, i / width);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
            for (nx, ny) in neighbors4(x, y, width, height) {
                let j = ny * width + nx;
                match kinds[j] {
                    CellKind::Fixed => touches_fixed = true,
                    CellKind::Free if !seen[j] => {
                        seen[j] = true;
                        stack.push(j);
                    }
                    _ => {}
                }
            }
        }
        if touches_fixed {
            extent = extent.max(x1 - x0 + 1).max(y1 - y0 + 1);
            anchored.extend_from_slice(&component);
        } else {
            unreachable.extend_from_slice(&component);
        }
    }
    anchored.sort_unstable();
    unreachable.sort_unstable();
    (anchored, unreachable, extent)
}
