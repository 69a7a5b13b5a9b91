use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kdvol::Execution;
use kdvol_harness::config::{ExperimentConfig, Mode, Statistic, Target};
use kdvol_harness::error::{HarnessError, Result};
use kdvol_harness::report::{fit_rate, Axis, DeviationReport};
use kdvol_harness::{json, plots, run};

/// Worker-count override for the thread pool.
const THREADS_ENV: &str = "KDVOL_THREADS";

#[derive(Parser)]
#[command(name = "kdvol", version, about = "Kernel density sup-deviation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; overrides `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Run on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Directory holding `report.json`; results are written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Configuration supplying the fit statistic and target.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Accepted for uniformity with the other subcommands.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["h", "n"])]
    axis: Option<String>,
    #[arg(long, value_parser = ["mean", "median", "q10", "q90"])]
    statistic: Option<String>,
    /// Fit the ray supremum instead of the fixed-bandwidth supremum.
    #[arg(long)]
    ray: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sup-deviation campaign (rate_in_h or rate_in_n).
    Simulate(Common),
    /// Log-log rate fit of a stored report.
    Fit(FitArgs),
    /// Volume-dimension sweep.
    Voldim(Common),
    /// Closed-form bound report.
    Bounds(Common),
    /// Covering-number sweep.
    Covering(Common),
    /// Kernel moment scaling in h.
    Moments(Common),
}

fn load(common: &Common, mode: Option<Mode>) -> Result<(ExperimentConfig, PathBuf, Execution)> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    match mode {
        Some(m) => cfg.mode = m,
        None if !matches!(cfg.mode, Mode::RateInH | Mode::RateInN) => {
            return Err(HarnessError::Config("simulate needs mode rate_in_h or rate_in_n".into()))
        }
        None => {}
    }
    cfg.validate()?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let exec = if common.sequential { Execution::Sequential } else { Execution::Parallel };
    Ok((cfg, out, exec))
}

fn execute(common: &Common, mode: Option<Mode>) -> Result<()> {
    let (cfg, out, exec) = load(common, mode)?;
    let report = run::run(&cfg, exec)?;
    report.write(&out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn fit(args: &FitArgs) -> Result<()> {
    let report = DeviationReport::load(&args.out)?;
    let mut spec = match &args.config {
        Some(p) => ExperimentConfig::load(p)?.fit,
        None => Default::default(),
    };
    if let Some(s) = &args.statistic {
        spec.statistic = match s.as_str() {
            "mean" => Statistic::Mean,
            "q10" => Statistic::Q10,
            "q90" => Statistic::Q90,
            _ => Statistic::Median,
        };
    }
    if args.ray {
        spec.target = Target::Ray;
    }
    let axis = match args.axis.as_deref() {
        Some("n") => Axis::N,
        Some(_) => Axis::H,
        None if report.mode == Mode::RateInN => Axis::N,
        None => Axis::H,
    };
    let rate = fit_rate(&report, axis, spec.statistic, spec.target, None)?;
    let text = json::to_string(&rate);
    let path = args.out.join("fit.json");
    std::fs::write(&path, &text).map_err(|e| HarnessError::io(&path, e))?;
    plots::emit_plots(&report, axis, spec, &args.out)?;
    print!("{text}");
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(c) => execute(c, None),
        Command::Fit(a) => fit(a),
        Command::Voldim(c) => execute(c, Some(Mode::Voldim)),
        Command::Bounds(c) => execute(c, Some(Mode::Bounds)),
        Command::Covering(c) => execute(c, Some(Mode::Covering)),
        Command::Moments(c) => execute(c, Some(Mode::MomentScaling)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.parse::<usize>() {
            Ok(t) if t > 0 => Some(t),
            _ => {
                let e = HarnessError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"));
                eprint!("{}", json::to_string(&e.summary()));
                return ExitCode::from(2);
            }
        },
        Err(_) => None,
    };
    let result = match threads {
        Some(t) => kdvol::par::with_threads(t, || dispatch(&cli)),
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("{}", json::to_string(&e.summary()));
            ExitCode::FAILURE
        }
    }
}
