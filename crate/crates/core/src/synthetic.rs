//! Procedural test scenes with known geometry.

use crate::grid::{ColorImage, DepthMap, Grid, Rgb};

/// Deterministic per-pixel hash in `[0, 1)`.
fn hash01(x: usize, y: usize, seed: u64) -> f32 {
    let mut h = (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ seed.wrapping_mul(0x1656_67B1_9E37_79F9);
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    (h >> 40) as f32 / (1u64 << 24) as f32
}

/// Smooth stripes plus per-pixel noise, so shifts are measurable.
pub fn texture(width: usize, height: usize, seed: u64) -> ColorImage {
    let phase = hash01(0, 0, seed) * 6.0;
    Grid::from_fn(width, height, |x, y| {
        let (xf, yf) = (x as f32, y as f32);
        let n = hash01(x, y, seed);
        let r = 0.5 + 0.35 * (0.37 * xf + phase).sin();
        let g = 0.5 + 0.35 * (0.23 * yf + 0.11 * xf + phase).cos();
        let b = 0.2 + 0.6 * n;
        [r, g, b]
    })
}

/// A near rectangle (central half of the frame) in front of a far
/// backdrop, both fronto-parallel.
pub fn two_plane(width: usize, height: usize, near: f32, far: f32, seed: u64) -> (ColorImage, DepthMap) {
    let depth = Grid::from_fn(width, height, |x, y| {
        let inside = x >= width / 4 && x < width - width / 4 && y >= height / 4 && y < height - height / 4;
        if inside {
            near
        } else {
            far
        }
    });
    (texture(width, height, seed), depth)
}

/// Depth ramping smoothly from `near` at the bottom row to `far` at the top.
pub fn gradient_depth(width: usize, height: usize, near: f32, far: f32, seed: u64) -> (ColorImage, DepthMap) {
    let depth = Grid::from_fn(width, height, |_, y| {
        let t = 1.0 - y as f32 / (height.max(2) - 1) as f32;
        near + (far - near) * t
    });
    (texture(width, height, seed), depth)
}

/// A single textured plane at constant depth.
pub fn textured_plane(width: usize, height: usize, depth: f32, seed: u64) -> (ColorImage, DepthMap) {
    (texture(width, height, seed), Grid::filled(width, height, depth))
}

/// Color that encodes the source column and row, for shift measurements.
/// `decode_column` recovers the column exactly for widths up to 256.
pub fn coordinate_color(width: usize, height: usize) -> ColorImage {
    Grid::from_fn(width, height, |x, y| {
        [x as f32 / 255.0, y as f32 / 255.0, 0.5]
    })
}

pub fn decode_column(c: Rgb) -> f32 {
    c[0] * 255.0
}
