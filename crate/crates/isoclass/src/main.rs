use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isoclass::{execute, ExperimentConfig, RunError};

#[derive(Parser)]
#[command(name = "isoclass", version, about = "Verification harnesses for semiclassical isotropic states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transport equations of orders 0, 1 and 2.
    TransportCheck(Common),
    /// Norm of built states against the leading-term prediction.
    NormCheck(Common),
    /// Seeded metaplectic factorization and representation checks.
    MetaplecticCheck(Common),
    /// Symbol laws of the elementary FIOs (quadratic phase, partial Fourier, pullback).
    FioCheck(Common),
    /// Thawed Gaussian against a split-step reference.
    Propagate(Common),
    /// Orbit-averaged Gaussian on a periodic orbit.
    OrbitAverage(Common),
    /// Pseudospectral quasimode construction sweep.
    Quasimode(Common),
    /// Husimi density of a coherent or propagated state.
    HusimiDump(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit wall-clock and timestamp fields so reruns are byte-identical.
    #[arg(long)]
    no_timestamps: bool,
}

impl Command {
    fn split(&self) -> (&'static str, &Common) {
        match self {
            Command::TransportCheck(c) => ("transport-check", c),
            Command::NormCheck(c) => ("norm-check", c),
            Command::MetaplecticCheck(c) => ("metaplectic-check", c),
            Command::FioCheck(c) => ("fio-check", c),
            Command::Propagate(c) => ("propagate", c),
            Command::OrbitAverage(c) => ("orbit-average", c),
            Command::Quasimode(c) => ("quasimode", c),
            Command::HusimiDump(c) => ("husimi-dump", c),
        }
    }
}

fn run(cli: &Cli) -> Result<bool, RunError> {
    let (name, args) = cli.command.split();
    let config = ExperimentConfig::load(&args.config)?;
    if config.name() != name {
        return Err(RunError::Config(format!("{} describes `{}`, not `{name}`", args.config.display(), config.name())));
    }
    let out = args.out.clone().or_else(|| config.out_dir().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    log::info!("running {name} into {}", out.display());
    let report = execute(&config, &out, !args.no_timestamps)?;
    for c in &report.criteria {
        let cmp = match c.comparison {
            isoclass::report::Comparison::AtMost => "<=",
            isoclass::report::Comparison::AtLeast => ">=",
        };
        println!("{} {}: {:.6e} {cmp} {:e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.measured, c.threshold);
    }
    if let Some(e) = &report.error {
        println!("FAIL harness error: {e}");
    }
    Ok(report.pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("isoclass: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
