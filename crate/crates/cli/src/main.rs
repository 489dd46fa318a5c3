use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use qtomo::manifest::{execute, Manifest, Overrides, SolverKind};
use qtomo::phantom::{generate_shepp_logan, load_image, save_image, PhantomMode};
use qtomo::projector::{load_sinogram, radon, save_sinogram, uniform_angles, Geometry};
use qtomo::resample::{downscale_full_view, downscale_sparse_view, Aggregate, AngleMode, DownscaleSpec};
use qtomo::verify::{run_checks, VerifyLevel};
use qtomo::{Error, Result};

#[derive(Parser)]
#[command(name = "qtomo", version, about = "Region-wise QUBO tomographic reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Binary,
    Integer,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Exhaustive,
    Sa,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum Agg {
    Mean,
    Max,
    Min,
}

#[derive(Clone, Copy, ValueEnum)]
enum Angles {
    PickSecond,
    MeanProjection,
}

#[derive(Subcommand)]
enum Command {
    /// Write a Shepp-Logan phantom.
    Phantom {
        #[arg(long)]
        size: usize,
        #[arg(long, value_enum, default_value = "binary")]
        mode: Mode,
        /// Number of intensity levels in integer mode.
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project an image to a sinogram.
    Project {
        #[arg(long)]
        image: PathBuf,
        /// Uniform angles over [0, 180).
        #[arg(long, conflicts_with = "angles_deg")]
        angles: Option<usize>,
        /// Explicit comma-separated angles in degrees.
        #[arg(long, value_delimiter = ',')]
        angles_deg: Option<Vec<f64>>,
        #[arg(long)]
        detectors: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce a sinogram to a lower resolution.
    Downscale {
        #[arg(long)]
        sino: PathBuf,
        /// Angle factor for full-view reduction.
        #[arg(long, conflicts_with = "sparse")]
        d1: Option<usize>,
        /// Detector factor for full-view reduction.
        #[arg(long, conflicts_with = "sparse")]
        d2: Option<usize>,
        /// Sparse-view reduction: keep every angle, merge `d` detectors.
        #[arg(long)]
        sparse: Option<usize>,
        #[arg(long, value_enum, default_value = "mean")]
        aggregate: Agg,
        #[arg(long, value_enum, default_value = "pick-second")]
        angle_mode: Angles,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a reconstruction manifest.
    Reconstruct {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        solver: Option<Solver>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Remote solver time limit in seconds.
        #[arg(long)]
        time_limit: Option<f64>,
    },
    /// Run the built-in oracle checks.
    Verify {
        #[arg(long, default_value = "tiny")]
        level: String,
    },
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Phantom { size, mode, levels, out } => {
            let mode = match mode {
                Mode::Binary => PhantomMode::Binary,
                Mode::Integer => PhantomMode::IntegerLevels(levels),
            };
            save_image(&generate_shepp_logan(size, mode)?, &out)?;
            println!("{}", json!({ "image": out, "size": size }));
        }
        Command::Project { image, angles, angles_deg, detectors, out } => {
            let img = load_image(&image)?;
            if !img.is_square() {
                return Err(Error::InvalidArgument("image must be square".into()));
            }
            let n = img.height();
            let angles = angles_deg.unwrap_or_else(|| uniform_angles(angles.unwrap_or(n)));
            let sino = radon(&img, &Geometry::new(n, angles, detectors.unwrap_or(n))?)?;
            save_sinogram(&sino, &out)?;
            println!("{}", json!({ "sinogram": out, "angles": sino.geometry().n_angles() }));
        }
        Command::Downscale { sino, d1, d2, sparse, aggregate, angle_mode, out } => {
            let input = load_sinogram(&sino)?;
            let aggregate = match aggregate {
                Agg::Mean => Aggregate::Mean,
                Agg::Max => Aggregate::Max,
                Agg::Min => Aggregate::Min,
            };
            let reduced = match sparse {
                Some(d) => downscale_sparse_view(&input, d, aggregate)?,
                None => {
                    let angle_mode = match angle_mode {
                        Angles::PickSecond => AngleMode::PickSecond,
                        Angles::MeanProjection => AngleMode::MeanProjection,
                    };
                    let spec = DownscaleSpec::new(d1.unwrap_or(1), d2.unwrap_or(1), aggregate, angle_mode);
                    downscale_full_view(&input, &spec)?
                }
            };
            save_sinogram(&reduced, &out)?;
            println!("{}", json!({ "sinogram": out, "image_size": reduced.geometry().image_size() }));
        }
        Command::Reconstruct { manifest, seed, solver, out_dir, time_limit } => {
            let mut m = Manifest::load(&manifest)?;
            let overrides = Overrides {
                seed,
                solver: solver.map(|s| match s {
                    Solver::Exhaustive => SolverKind::Exhaustive,
                    Solver::Sa => SolverKind::Sa,
                    Solver::Remote => SolverKind::Remote,
                }),
                out_dir,
                time_limit_s: time_limit,
            };
            m.apply_overrides(&overrides)?;
            let out = execute(&m)?;
            println!("{}", out.summary.to_json()?);
        }
        Command::Verify { level } => {
            let level: VerifyLevel = level.parse()?;
            let outcomes = run_checks(level)?;
            for o in &outcomes {
                println!("{} {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
            }
            return Ok(outcomes.iter().all(|o| o.passed));
        }
    }
    Ok(true)
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", json!({ "kind": kind, "message": message }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            report_error("usage", e.to_string().trim());
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            ExitCode::from(1)
        }
    }
}
