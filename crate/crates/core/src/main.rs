use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use rislink::harness::{self, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "rislink", version, about = "RIS-assisted industrial link experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SNR statistics of optimized and relay-mode surfaces.
    SnrCdf(Common),
    /// Normalized gain under phase-estimation errors.
    CsiError(Common),
    /// TD3 phase optimization of the multi-actuator sum rate.
    Td3Train(Common),
    /// Fit the link budget to the median anchors of an snr-cdf config.
    Calibrate(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: `output` from the config, else `out/<experiment>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// `section.key=value`, repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(kind: ExperimentKind, args: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(trials) = args.trials {
        overrides.push(format!("trials={trials}"));
    }
    let config = match &args.config {
        Some(path) => ExperimentConfig::load(path, &overrides)?,
        None => {
            let seed = args.seed.context("no config file given; --seed is required")?;
            let base = ExperimentConfig::new(kind, seed)?.to_toml_string();
            ExperimentConfig::from_toml_str(&base, &overrides)?
        }
    };
    if config.experiment != kind {
        bail!("config describes a {} experiment, not {}", config.experiment.name(), kind.name());
    }
    Ok(config)
}

fn out_dir(config: &ExperimentConfig, args: &Common, name: &str) -> PathBuf {
    args.out.clone().or_else(|| config.output.clone()).unwrap_or_else(|| PathBuf::from("out").join(name))
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let (kind, args, calibrate) = match &cli.command {
        Command::SnrCdf(a) => (ExperimentKind::SnrCdf, a, false),
        Command::CsiError(a) => (ExperimentKind::CsiError, a, false),
        Command::Td3Train(a) => (ExperimentKind::Td3Train, a, false),
        Command::Calibrate(a) => (ExperimentKind::SnrCdf, a, true),
    };
    let config = load(kind, args)?;
    let report = if calibrate {
        let (budget, report) = harness::calibrate_budget(&config)?;
        println!(
            "[budget]\ntx_power_db = {}\nnoise_power_db = {}\ndirect_path_offset_db = {}",
            budget.tx_power_db, budget.noise_power_db, budget.direct_path_offset_db
        );
        report
    } else {
        harness::run(&config)?
    };
    let dir = out_dir(&config, args, if calibrate { "calibrate" } else { kind.name() });
    report.write(&dir)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("wrote {} files to {} (fingerprint {})", report.files.len() + 1, dir.display(), report.fingerprint);
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
