//! Writes the bundled sample scene: a river running across a valley floor
//! with a boulder in front and a far ridge.
//!
//! cargo run -p cinema3d-core --example make_sample -- samples

use std::path::PathBuf;

use cinema3d_core::assets;
use cinema3d_core::grid::Grid;
use cinema3d_core::motion::{FlowHint, HintsDocument};

const W: usize = 256;
const H: usize = 144;

fn hash(x: usize, y: usize) -> f32 {
    let mut h = (x as u32).wrapping_mul(0x27d4_eb2d) ^ (y as u32).wrapping_mul(0x1656_67b1);
    h ^= h >> 15;
    h = h.wrapping_mul(0x85eb_ca6b);
    h ^= h >> 13;
    (h & 0xffff) as f32 / 65535.0
}

fn horizon(x: usize) -> f32 {
    52.0 + 8.0 * (x as f32 * 0.045).sin() + 4.0 * (x as f32 * 0.13 + 1.0).sin()
}

fn in_river(x: usize, y: usize) -> bool {
    let center = 104.0 + 6.0 * (x as f32 * 0.05).sin();
    (y as f32 - center).abs() < 11.0
}

fn in_boulder(x: usize, y: usize) -> bool {
    let (dx, dy) = ((x as f32 - 196.0) / 34.0, (y as f32 - 122.0) / 26.0);
    dx * dx + dy * dy < 1.0
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "samples".into()));
    std::fs::create_dir_all(&out)?;

    let depth = Grid::from_fn(W, H, |x, y| {
        if in_boulder(x, y) {
            2.2 + 0.3 * (y as f32 - 122.0).abs() / 26.0
        } else if (y as f32) < horizon(x) {
            40.0
        } else {
            // ground plane seen from eye height 1.5
            let rows_below = y as f32 - 40.0;
            (1.5 * 120.0 / rows_below).clamp(3.0, 30.0)
        }
    });
    let color = Grid::from_fn(W, H, |x, y| {
        let n = hash(x, y);
        if in_boulder(x, y) {
            [0.18 + 0.1 * n, 0.16 + 0.08 * n, 0.14 + 0.06 * n]
        } else if (y as f32) < horizon(x) {
            let t = y as f32 / 60.0;
            [0.35 + 0.2 * t, 0.55 + 0.2 * t, 0.9 - 0.1 * t]
        } else if in_river(x, y) {
            let ripple = 0.5 + 0.5 * ((x as f32) * 0.6 + (y as f32) * 0.2).sin();
            [0.05 + 0.05 * n, 0.2 + 0.1 * ripple, 0.35 + 0.15 * ripple + 0.05 * n]
        } else {
            [0.2 + 0.1 * n, 0.4 + 0.15 * n, 0.12 + 0.05 * n]
        }
    });
    let mask = Grid::from_fn(W, H, |x, y| in_river(x, y) && !in_boulder(x, y));

    let hints: Vec<FlowHint> = [24.0f32, 80.0, 136.0]
        .iter()
        .map(|&x| FlowHint {
            x,
            y: (104.0 + 6.0 * (x * 0.05).sin()).round(),
            dx: 0.6,
            dy: 0.3 * (x * 0.05).cos(),
        })
        .collect();
    let doc = HintsDocument {
        mask: Some("mask.png".into()),
        hints,
        speed: 1.0,
    };

    assets::save_frame(&color, out.join("image.png"))?;
    assets::save_pfm(&depth, out.join("depth.pfm"))?;
    assets::save_mask(&mask, out.join("mask.png"))?;
    std::fs::write(out.join("hints.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    let job = serde_json::json!({
        "image": "image.png",
        "depth": "depth.pfm",
        "hints": "hints.json",
        "out": "frames",
        "trajectory": "sway",
        "amplitude": 0.03,
        "frames": 30
    });
    std::fs::write(out.join("job.json"), serde_json::to_string_pretty(&job)? + "\n")?;
    println!("sample scene written to {}", out.display());
    Ok(())
}
