use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cinema3d_core::assets;
use cinema3d_core::pipeline::config::read_document;
use cinema3d_core::pipeline::{load_hints, motion_from_hints, render_cinemagraph, validate_config, JobError, Preset};
use cinema3d_service::ServiceConfig;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

/// Looping 3D cinemagraphs from a single image, a depth map and motion hints.
#[derive(Parser, Debug)]
#[command(name = "cinema3d", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a PNG frame sequence from a job config.
    Render(RenderArgs),
    /// Densify a hints document into a .flo field for inspection.
    Motion(MotionArgs),
    /// Run the HTTP service for the authoring UI.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
struct RenderArgs {
    /// Job document; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long)]
    depth: Option<PathBuf>,
    #[arg(long, conflicts_with = "hints")]
    flow: Option<PathBuf>,
    #[arg(long)]
    hints: Option<PathBuf>,
    #[arg(long, value_parser = parse_preset)]
    trajectory: Option<Preset>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MotionArgs {
    /// Source image; only its size is used.
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    hints: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Directory that path-valued hint masks resolve against.
    #[arg(long)]
    assets: Option<PathBuf>,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse::<Preset>().map_err(|e| e.to_string())
}

/// Flags are relative to the working directory, unlike config keys, which
/// are relative to the config file.
fn absolute(path: &Path) -> PathBuf {
    std::env::current_dir().map_or_else(|_| path.to_path_buf(), |cwd| cwd.join(path))
}

fn job_document(args: &RenderArgs) -> Result<(Value, PathBuf), JobError> {
    let (mut doc, base) = match &args.config {
        Some(path) => {
            let doc = read_document(path)?;
            let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
            (doc, base)
        }
        None => (json!({}), PathBuf::from(".")),
    };
    let map = doc
        .as_object_mut()
        .ok_or_else(|| JobError::Config(cinema3d_core::pipeline::ConfigError::Parse("job document must be a JSON object".into())))?;
    let mut set_path = |key: &str, value: &Option<PathBuf>| {
        if let Some(p) = value {
            map.insert(key.into(), json!(absolute(p)));
        }
    };
    set_path("image", &args.image);
    set_path("depth", &args.depth);
    set_path("out", &args.out);
    // a motion flag replaces whichever source the config named
    if let Some(p) = &args.flow {
        map.remove("hints");
        map.insert("flow".into(), json!(absolute(p)));
    }
    if let Some(p) = &args.hints {
        map.remove("flow");
        map.insert("hints".into(), json!(absolute(p)));
    }
    if let Some(preset) = args.trajectory {
        map.insert("trajectory".into(), json!(preset.name()));
    }
    if let Some(n) = args.frames {
        map.insert("frames".into(), json!(n));
    }
    if let Some(a) = args.amplitude {
        map.insert("amplitude".into(), json!(a));
    }
    Ok((doc, base))
}

fn render(args: &RenderArgs) -> Result<(), JobError> {
    let (doc, base) = job_document(args)?;
    let config = validate_config(&doc, &base)?;
    let paths = render_cinemagraph(&config)?;
    println!("wrote {} frames to {}", paths.len(), config.out_dir.display());
    Ok(())
}

fn motion(args: &MotionArgs) -> Result<(), JobError> {
    let color = assets::load_color(&args.image)?;
    let (doc, mask_path) = load_hints(&args.hints)?;
    let mask = mask_path.map(assets::load_mask).transpose()?;
    let est = motion_from_hints(&doc, mask, color.dims())?;
    assets::save_flow(&est.flow, &args.out)?;
    let peak = est
        .flow
        .iter()
        .map(|v| (v[0] as f64).hypot(v[1] as f64))
        .fold(0.0, f64::max);
    println!(
        "wrote {} ({} sweeps{}, max speed {peak:.3} px/frame)",
        args.out.display(),
        est.iterations,
        if est.converged { "" } else { ", not converged" }
    );
    Ok(())
}

fn serve(args: &ServeArgs) -> ExitCode {
    if let Some(dir) = &args.assets {
        if !dir.is_dir() {
            eprintln!("error: assets directory {} does not exist", dir.display());
            return ExitCode::from(2);
        }
    }
    let config = ServiceConfig {
        assets_dir: args.assets.clone(),
        ..ServiceConfig::default()
    };
    match cinema3d_service::serve_blocking(SocketAddr::new(args.host, args.port), config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Render(args) => render(args),
        Command::Motion(args) => motion(args),
        Command::Serve(args) => return serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
