use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use fvsbl_experiment::config::ExperimentConfig;
use fvsbl_experiment::{emit_outputs, ensure_writable, run_sweep, ExperimentError};

/// Monte Carlo sweep comparing estimation with and without calibration
/// weight estimation over a range of weight deviations.
#[derive(Debug, Parser)]
#[command(name = "fvsbl-sweep", version)]
struct Cli {
    /// TOML configuration file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Weight deviation to simulate; repeat to build the grid.
    #[arg(long = "sigma")]
    sigmas: Vec<f64>,

    /// Trials per sigma value.
    #[arg(long)]
    trials: Option<usize>,

    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Only run with calibration enabled.
    #[arg(long, conflicts_with = "no_cal_only")]
    cal_only: bool,

    /// Only run with calibration disabled.
    #[arg(long)]
    no_cal_only: bool,

    /// Output directory (default: $FVSBL_OUT_DIR, else ./results).
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    parallelism: Option<usize>,

    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if !cli.sigmas.is_empty() {
        cfg.sigma_grid = cli.sigmas.clone();
    }
    if let Some(t) = cli.trials {
        cfg.trials_per_sigma = t;
    }
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if cli.cal_only {
        cfg.modes.nocal = false;
        cfg.modes.cal = true;
    }
    if cli.no_cal_only {
        cfg.modes.cal = false;
        cfg.modes.nocal = true;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(p) = cli.parallelism {
        cfg.parallelism = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    let cfg = resolve(&cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml_string());
        return Ok(());
    }
    ensure_writable(&cfg.out_dir)?;
    let start = Instant::now();
    let records = run_sweep(&cfg)?;
    let written = emit_outputs(&records, &cfg.out_dir)?;

    let failed = records.iter().filter(|r| r.failure.is_some()).count();
    let converged = records.iter().filter(|r| r.converged).count();
    eprintln!(
        "{} runs in {:.1}s: {} converged, {} failed",
        records.len(),
        start.elapsed().as_secs_f64(),
        converged,
        failed
    );
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
