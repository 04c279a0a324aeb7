use std::path::Path;

use cinema3d_core::assets;
use cinema3d_core::grid::Grid;
use cinema3d_core::pipeline::{
    load_config, prepare, render_cinemagraph, validate_config, ConfigError, JobError, MotionSource, Preset,
};
use cinema3d_core::renderer::{splat, SplatConfig, SplatMode};
use cinema3d_core::synthetic;
use serde_json::json;

fn write_assets(dir: &Path, w: usize, h: usize) {
    let (color, depth) = synthetic::two_plane(w, h, 2.0, 6.0, 1);
    assets::save_frame(&color, dir.join("image.png")).unwrap();
    assets::save_pfm(&depth, dir.join("depth.pfm")).unwrap();
    assets::save_flow(&Grid::filled(w, h, [0.0f32, 0.0]), dir.join("zero.flo")).unwrap();
    assets::save_flow(&Grid::filled(w, h, [0.3f32, -0.1]), dir.join("drift.flo")).unwrap();
}

#[test]
fn still_camera_and_no_motion_gives_identical_frames() {
    let dir = tempfile::tempdir().unwrap();
    write_assets(dir.path(), 8, 8);
    let doc = json!({
        "image": "image.png", "depth": "depth.pfm", "flow": "zero.flo",
        "out": "frames", "trajectory": "still", "frames": 4
    });
    let config = validate_config(&doc, dir.path()).unwrap();
    let paths = render_cinemagraph(&config).unwrap();
    assert_eq!(paths.len(), 4);
    let first = std::fs::read(&paths[0]).unwrap();
    for p in &paths {
        assert_eq!(std::fs::read(p).unwrap(), first);
    }
    assert_eq!(paths[3].file_name().unwrap(), "frame_00003.png");
}

#[test]
fn minimal_config_takes_documented_defaults() {
    let dir = tempfile::tempdir().unwrap();
    write_assets(dir.path(), 8, 8);
    let doc = json!({ "image": "image.png", "depth": "depth.pfm", "flow": "zero.flo", "out": "o" });
    let config = validate_config(&doc, dir.path()).unwrap();
    assert_eq!(config.preset, Preset::Sway);
    assert_eq!(config.frames, 60);
    assert_eq!(config.render.splat.mode, SplatMode::Soft);
    assert_eq!(config.motion, MotionSource::Flow(dir.path().join("zero.flo")));
    assert_eq!(config.out_dir, dir.path().join("o"));
}

#[test]
fn missing_depth_fails_before_rendering() {
    let dir = tempfile::tempdir().unwrap();
    write_assets(dir.path(), 8, 8);
    let doc = json!({ "image": "image.png", "depth": "nope.pfm", "flow": "zero.flo", "out": "frames" });
    let err = validate_config(&doc, dir.path()).unwrap_err();
    assert!(matches!(err, ConfigError::MissingFile { key: "depth", .. }), "{err}");
    assert!(!dir.path().join("frames").exists());
}

#[test]
fn contradictory_and_unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_assets(dir.path(), 8, 8);
    let both = json!({
        "image": "image.png", "depth": "depth.pfm", "flow": "zero.flo", "hints": "h.json", "out": "o"
    });
    let msg = validate_config(&both, dir.path()).unwrap_err().to_string();
    assert!(msg.contains("ambiguous motion source"), "{msg}");

    let unknown = json!({ "image": "image.png", "depth": "depth.pfm", "flow": "zero.flo", "out": "o", "fps2": 3 });
    let msg = validate_config(&unknown, dir.path()).unwrap_err().to_string();
    assert!(msg.contains("fps2"), "{msg}");
}

#[test]
fn config_file_paths_resolve_next_to_the_file() {
    let dir = tempfile::tempdir().unwrap();
    write_assets(dir.path(), 8, 8);
    let path = dir.path().join("job.json");
    std::fs::write(
        &path,
        json!({ "image": "image.png", "depth": "depth.pfm", "flow": "drift.flo", "out": "o", "frames": 3 }).to_string(),
    )
    .unwrap();
    let config = load_config(&path).unwrap();
    assert_eq!(config.image, dir.path().join("image.png"));
}

#[test]
fn mismatched_flow_is_an_asset_error() {
    let dir = tempfile::tempdir().unwrap();
    write_assets(dir.path(), 8, 8);
    assets::save_flow(&Grid::filled(5, 5, [0.0f32; 2]), dir.path().join("small.flo")).unwrap();
    let doc = json!({ "image": "image.png", "depth": "depth.pfm", "flow": "small.flo", "out": "o" });
    let err = prepare(&validate_config(&doc, dir.path()).unwrap()).unwrap_err();
    assert!(matches!(err, JobError::Asset(_)));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn hints_job_without_mask_animates_the_whole_frame() {
    let dir = tempfile::tempdir().unwrap();
    write_assets(dir.path(), 12, 10);
    std::fs::write(
        dir.path().join("hints.json"),
        json!({ "hints": [{ "x": 3.0, "y": 4.0, "dx": 0.5, "dy": 0.0 }], "speed": 2.0 }).to_string(),
    )
    .unwrap();
    let doc = json!({ "image": "image.png", "depth": "depth.pfm", "hints": "hints.json", "out": "o", "frames": 4 });
    let job = prepare(&validate_config(&doc, dir.path()).unwrap()).unwrap();
    for v in job.flow.iter() {
        assert!((v[0] - 1.0).abs() < 1e-4 && v[1].abs() < 1e-4, "{v:?}");
    }
}

#[test]
fn hint_outside_mask_is_a_config_class_error() {
    let dir = tempfile::tempdir().unwrap();
    write_assets(dir.path(), 8, 8);
    let mask = Grid::from_fn(8, 8, |x, _| x < 4);
    assets::save_mask(&mask, dir.path().join("mask.png")).unwrap();
    std::fs::write(
        dir.path().join("hints.json"),
        json!({ "mask": "mask.png", "hints": [{ "x": 6.0, "y": 1.0, "dx": 1.0, "dy": 0.0 }] }).to_string(),
    )
    .unwrap();
    let doc = json!({ "image": "image.png", "depth": "depth.pfm", "hints": "hints.json", "out": "o" });
    let err = prepare(&validate_config(&doc, dir.path()).unwrap()).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

#[test]
fn first_frame_matches_nearest_reprojection_of_the_input() {
    let dir = tempfile::tempdir().unwrap();
    write_assets(dir.path(), 48, 32);
    let doc = json!({
        "image": "image.png", "depth": "depth.pfm", "flow": "drift.flo",
        "out": "o", "frames": 6, "trajectory": "zoom", "splat": { "mode": "nearest" }
    });
    let job = prepare(&validate_config(&doc, dir.path()).unwrap()).unwrap();
    let frame = job.render_frame(0).unwrap();
    let cfg = SplatConfig {
        mode: SplatMode::Nearest,
        ..SplatConfig::default()
    };
    let direct = splat(&job.scene.cloud, &job.trajectory.cameras[0], 48, 32, &cfg);
    let input = assets::load_color(dir.path().join("image.png")).unwrap();
    for i in 0..48 * 32 {
        if direct.alpha.as_slice()[i] > 0.0 {
            assert_eq!(frame.color.as_slice()[i], direct.color.as_slice()[i]);
            assert_eq!(frame.color.as_slice()[i], input.as_slice()[i]);
        }
    }
}

#[test]
fn rerunning_a_job_overwrites_with_identical_frames() {
    let dir = tempfile::tempdir().unwrap();
    write_assets(dir.path(), 24, 16);
    let doc = json!({
        "image": "image.png", "depth": "depth.pfm", "flow": "drift.flo",
        "out": "o", "frames": 3, "trajectory": "orbit", "dump_layers": true
    });
    let config = validate_config(&doc, dir.path()).unwrap();
    let first: Vec<Vec<u8>> = render_cinemagraph(&config)
        .unwrap()
        .iter()
        .map(|p| std::fs::read(p).unwrap())
        .collect();
    let second: Vec<Vec<u8>> = render_cinemagraph(&config)
        .unwrap()
        .iter()
        .map(|p| std::fs::read(p).unwrap())
        .collect();
    assert_eq!(first, second);
    assert!(dir.path().join("o/layers/layer_0_color.png").exists());
}

#[test]
fn bundled_sample_renders_thirty_frames() {
    let samples = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../samples");
    let mut doc = cinema3d_core::pipeline::config::read_document(&samples.join("job.json")).unwrap();
    let out = tempfile::tempdir().unwrap();
    doc["out"] = json!(out.path());
    let config = validate_config(&doc, &samples).unwrap();
    assert_eq!(config.frames, 30);
    let paths = render_cinemagraph(&config).unwrap();
    assert_eq!(paths.len(), 30);
    for p in &paths {
        let frame = assets::load_color(p).unwrap();
        assert_eq!(frame.dims(), (256, 144));
    }

    // frame 0 from the source pose reproduces the input wherever a point lands
    let mut nearest = config.clone();
    nearest.render.splat.mode = SplatMode::Nearest;
    let job = prepare(&nearest).unwrap();
    let frame = job.render_frame(0).unwrap();
    let direct = splat(&job.scene.cloud, &job.trajectory.cameras[0], 256, 144, &nearest.render.splat);
    let input = assets::load_color(samples.join("image.png")).unwrap();
    let covered = direct.alpha.iter().filter(|&&a| a > 0.0).count();
    assert!(covered as f64 >= 0.99 * (256.0 * 144.0));
    for i in 0..256 * 144 {
        if direct.alpha.as_slice()[i] > 0.0 {
            assert_eq!(frame.color.as_slice()[i], input.as_slice()[i]);
        }
    }
}

#[test]
fn loop_closes_from_an_arbitrary_camera() {
    use cinema3d_core::camera::{rotation_y, Camera, Intrinsics};
    use cinema3d_core::renderer::{render_view, RenderConfig};
    use cinema3d_core::scene::{build_scene, SceneConfig};

    let (w, h) = (40usize, 30usize);
    let (color, depth) = synthetic::two_plane(w, h, 1.5, 6.0, 4);
    let k = Intrinsics::from_fov(w, h, 60.0);
    let scene = build_scene(&color, &depth, k, &SceneConfig::default()).unwrap();
    let flow = Grid::from_fn(w, h, |x, _| [0.4 + 0.02 * x as f32, 0.1]);
    // off the source pose, so the undisplaced render has disocclusion holes
    let cam = Camera::from_center(k, rotation_y(0.08), nalgebra::Vector3::new(0.3, -0.1, 0.2));
    let cfg = RenderConfig::default();
    let first = render_view(&scene, &flow, 0, 9, &cam, &cfg).unwrap();
    let last = render_view(&scene, &flow, 9, 9, &cam, &cfg).unwrap();
    assert!(first.holes > 0);
    assert_eq!(first.color, last.color);
}
