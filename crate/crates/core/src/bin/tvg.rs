use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tvg_core::eval::evaluate;
use tvg_core::pipeline::{
    load_config, parse_pose, read_tum, run_slam, save_config, write_dataset, write_outputs,
    MappingMode, RunConfig,
};
use tvg_core::splat::{read_ply, render, Image};
use tvg_core::TvgError;

#[derive(Parser)]
#[command(
    name = "tvg",
    version,
    about = "Tri-view Gaussian-splatting SLAM on synthetic or precomputed matches"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (trajectory, images, matches, map, manifest).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run SLAM and write trajectory, map, logs and evaluation.
    Run(RunArgs),
    /// Compare two TUM trajectories, optionally with image directories.
    Eval {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Directory pair `reference,rendered` of same-named PNG or TVGF files.
        #[arg(long)]
        images: Option<String>,
        /// Where to write eval.csv and summary.txt (defaults to stdout only).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a PLY map from a pose `"tx ty tz qx qy qz qw"` (world-from-camera).
    Render {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        pose: String,
        #[arg(long)]
        out: PathBuf,
        /// Config supplying camera and render options (defaults otherwise).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    disable_l2d: bool,
    #[arg(long)]
    disable_l3d: bool,
    #[arg(long)]
    disable_dart: bool,
    #[arg(long)]
    disable_tugi: bool,
    /// Deferred mapping with this batch size.
    #[arg(long)]
    defer: Option<usize>,
}

fn exit_code(e: &TvgError) -> u8 {
    match e {
        TvgError::TrackingFailure { .. } => 2,
        _ => 3,
    }
}

fn read_image(path: &Path) -> Result<Image, TvgError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tvgf") => Image::read_tvgf(path),
        _ => Image::read_png(path),
    }
}

fn image_pairs(spec: &str) -> Result<Vec<(Image, Image)>, TvgError> {
    let (a, b) = spec
        .split_once(',')
        .ok_or_else(|| TvgError::Config("--images expects `reference_dir,rendered_dir`".into()))?;
    let (a, b) = (Path::new(a), Path::new(b));
    let mut names: Vec<PathBuf> = std::fs::read_dir(a)
        .map_err(|e| TvgError::Io {
            path: a.to_path_buf(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("png") | Some("tvgf")
            )
        })
        .collect();
    names.sort();
    names
        .iter()
        .filter(|p| b.join(p.file_name().unwrap_or_default()).exists())
        .map(|p| {
            Ok((
                read_image(p)?,
                read_image(&b.join(p.file_name().unwrap_or_default()))?,
            ))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), TvgError> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = load_config(&config)?;
            let m = write_dataset(&cfg, &out)?;
            println!(
                "wrote {} frames, {} artifacts to {}",
                m.frames,
                m.artifacts.len(),
                out.display()
            );
        }
        Command::Run(args) => {
            let mut cfg = load_config(&args.config)?;
            cfg.ablation.disable_l2d |= args.disable_l2d;
            cfg.ablation.disable_l3d |= args.disable_l3d;
            cfg.ablation.disable_dart |= args.disable_dart;
            cfg.ablation.disable_tugi |= args.disable_tugi;
            if let Some(b) = args.defer {
                cfg.run.mapping_mode = MappingMode::Deferred;
                cfg.run.defer_batch = b;
            }
            let out = args
                .out
                .or_else(|| cfg.run.output_dir.clone())
                .ok_or_else(|| {
                    TvgError::Config("no output directory (--out or run.output_dir)".into())
                })?;
            let outcome = run_slam(&cfg)?;
            save_config(&cfg, &out.join("config.toml"))?;
            write_outputs(&outcome, &out)?;
            if let Some(r) = &outcome.report {
                print!("{}", r.summary());
            }
            if let Some(e) = outcome.failure {
                return Err(e);
            }
        }
        Command::Eval {
            est,
            gt,
            images,
            out,
        } => {
            let est = read_tum(&est)?;
            let gt = read_tum(&gt)?;
            let pairs = match images {
                Some(spec) => image_pairs(&spec)?,
                None => Vec::new(),
            };
            let report = evaluate(&est.poses, &gt.poses, &pairs)?;
            if let Some(dir) = out {
                tvg_core::pipeline::io::write_atomic(
                    &dir.join("eval.csv"),
                    report.csv().as_bytes(),
                )?;
                tvg_core::pipeline::io::write_atomic(
                    &dir.join("summary.txt"),
                    report.summary().as_bytes(),
                )?;
            }
            print!("{}", report.summary());
        }
        Command::Render {
            map,
            pose,
            out,
            config,
        } => {
            let cfg = match config {
                Some(c) => load_config(&c)?,
                None => RunConfig::default(),
            };
            let pose = parse_pose(&pose).map_err(|m| TvgError::Config(format!("--pose: {m}")))?;
            let map = read_ply(&map)?;
            let img = render(&map, &pose.inverse(), &cfg.camera, &cfg.render).color;
            match out.extension().and_then(|e| e.to_str()) {
                Some("tvgf") => img.write_tvgf(&out)?,
                _ => img.write_png(&out)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
