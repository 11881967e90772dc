use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use poresim::{Error, Precision, Result};
use poresim_cli::config::{InputSpec, VerifyCase};
use poresim_cli::{commands, exit_code, load_config, pipeline, PipelineConfig};

/// Image-based reaction-diffusion in porous media.
///
/// Configuration is a single JSON document (see docs/config.md). Every
/// subcommand accepts --config and repeated --set key=value overrides,
/// where key is a dotted path and value is JSON or a bare string.
/// RD_THREADS caps the number of worker threads.
#[derive(Parser)]
#[command(name = "poresim", version)]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON pipeline config.
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a config value, e.g. --set simulation.n_steps=500.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct InputArgs {
    /// Geometry input; format from the extension (.raw, .pgm or a directory, .dfld, .sbgr).
    #[arg(short, long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Voxel edge for PGM input.
    #[arg(long, default_value_t = 1.0)]
    voxel_size: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Disk,
    Ball,
    DiskRedistance,
}

#[derive(Subcommand)]
enum Command {
    /// Mask to signed distance field (DFLD snapshot plus diagnostics JSON).
    Redistance {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
        /// Treat the input as an SDF and only re-run the redistancing iteration.
        #[arg(long)]
        assume_sdf: bool,
        /// SDF snapshot path [default: <outputs.dir>/<outputs.sdf_snapshot>].
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Diagnostics JSON path [default: output with .json extension].
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        /// Also write the SDF as a VTK file.
        #[arg(long)]
        vtk: Option<PathBuf>,
    },
    /// Geometry to sparse grid snapshot (SBGR); prints occupancy statistics.
    BuildGrid {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
        /// Grid snapshot path [default: <outputs.dir>/<outputs.grid_snapshot>].
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Time integration with mass CSV, VTK series and final snapshot.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
        /// Run even if dt violates the stability bound.
        #[arg(long)]
        force_dt: bool,
        /// Override simulation.n_steps; 0 writes the initial state only.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// FRAP recovery curve and effective diffusivity fit.
    Frap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Convergence study with a PASS/FAIL verdict on the slope window.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        case: Option<CaseArg>,
        /// Comma-separated resolutions, e.g. 32,64,128.
        #[arg(long, value_delimiter = ',')]
        resolutions: Vec<usize>,
    },
    /// Occupancy and snapshot-size statistics of a geometry or grid snapshot.
    Stats {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
    },
}

fn prepare(common: &Common, input: Option<&InputArgs>) -> Result<PipelineConfig> {
    let mut cfg = load_config(common.config.as_deref(), &common.set)?;
    if let Some(InputArgs {
        input: Some(path),
        voxel_size,
    }) = input
    {
        cfg.input = Some(InputSpec::from_path(path, *voxel_size)?);
    }
    cfg.validate()?;
    Ok(cfg)
}

macro_rules! dispatch {
    ($prec:expr, $f:ident ( $($arg:expr),* )) => {
        match $prec {
            Precision::F32 => commands::$f::<f32>($($arg),*),
            Precision::F64 => commands::$f::<f64>($($arg),*),
        }
    };
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Redistance {
            common,
            input,
            assume_sdf,
            output,
            diagnostics,
            vtk,
        } => {
            let cfg = prepare(&common, Some(&input))?;
            dispatch!(
                cfg.precision,
                redistance(&cfg, assume_sdf, output, diagnostics, vtk)
            )
        }
        Command::BuildGrid {
            common,
            input,
            output,
        } => {
            let cfg = prepare(&common, Some(&input))?;
            dispatch!(
                pipeline::effective_precision(&cfg)?,
                build_grid_cmd(&cfg, output)
            )
        }
        Command::Simulate {
            common,
            input,
            force_dt,
            steps,
        } => {
            let cfg = prepare(&common, Some(&input))?;
            dispatch!(
                pipeline::effective_precision(&cfg)?,
                simulate(&cfg, steps, force_dt)
            )
        }
        Command::Frap { common, input } => {
            let cfg = prepare(&common, Some(&input))?;
            let report = dispatch!(pipeline::effective_precision(&cfg)?, frap(&cfg))?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Verify {
            common,
            case,
            resolutions,
        } => {
            let mut cfg = prepare(&common, None)?;
            if let Some(c) = case {
                cfg.verify.case = match c {
                    CaseArg::Disk => VerifyCase::Disk,
                    CaseArg::Ball => VerifyCase::Ball,
                    CaseArg::DiskRedistance => VerifyCase::DiskRedistance,
                };
            }
            if !resolutions.is_empty() {
                cfg.verify.resolutions = resolutions;
            }
            cfg.validate()?;
            let (report, pass) = dispatch!(cfg.precision, verify(&cfg))?;
            let [lo, hi] = cfg.verify.slope_window();
            let slopes = report
                .fitted_slopes
                .map_or("no slope (need two resolutions)".to_string(), |s| {
                    format!("L2 slope {:.3}, Linf slope {:.3}", s.l2, s.linf)
                });
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{}: {slopes}, window [{lo}, {hi}]: {}",
                report.label,
                if pass { "PASS" } else { "FAIL" }
            );
            Ok(())
        }
        Command::Stats { common, input } => {
            let cfg = prepare(&common, Some(&input))?;
            dispatch!(pipeline::effective_precision(&cfg)?, stats(&cfg))
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("RD_THREADS") else {
        return Ok(());
    };
    let n: usize =
        v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            Error::Input(format!("RD_THREADS must be a positive integer, got `{v}`"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Input(format!("cannot start {n} worker threads: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match configure_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
