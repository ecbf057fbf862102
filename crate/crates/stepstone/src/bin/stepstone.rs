//! Batch driver: one subcommand per experiment battery. Prints the
//! resolved configuration and one verdict line per check, writes the
//! report artifacts, and exits 0 exactly when every check passed.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use stepstone::config::{parse_config, ExperimentConfig, ExperimentKind};
use stepstone::report::{write_report, ReportFormat};
use stepstone::runner::run_experiment;

#[derive(Parser)]
#[command(name = "stepstone", version, about = "stepping-stone model verification driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration file (line-oriented `key = value`).
    /// Defaults are used when omitted; the subcommand always decides the
    /// experiment kind.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed, overriding the configuration file.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory for report artifacts, overriding the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads. Results are identical for any worker count; this
    /// only trades wall-clock time.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Report format. JSON is always written; `csv`/`both` additionally
    /// write one CSV table per curve.
    #[arg(long, global = true, value_name = "FMT", default_value = "both",
          value_parser = format_from_str)]
    format: ReportFormat,
}

fn format_from_str(s: &str) -> Result<ReportFormat, String> {
    ReportFormat::parse(s).ok_or_else(|| format!("unknown format `{s}`; expected json, csv, or both"))
}

/// Which battery to run; mirrors `ExperimentKind`.
#[derive(Subcommand)]
enum Command {
    /// Environment sampling, closed-form parameters, identities, bounds.
    Env,
    /// Forward field integrity: absorption, conservation, refinement.
    Forward,
    /// Dual walk homogenization: MSD slope and the meeting rate.
    Dual,
    /// Exact kernels: decay of the sup error, energy and diagonal bounds,
    /// meeting-chain reversibility.
    Kernel,
    /// Moment duality of the field against its coalescing walks.
    Duality,
    /// Rescaled coalescence law against the delayed-merge Brownian flow.
    Universality,
    /// The full verification battery at its stated scales.
    Acceptance,
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Env => ExperimentKind::Env,
            Command::Forward => ExperimentKind::Forward,
            Command::Dual => ExperimentKind::Dual,
            Command::Kernel => ExperimentKind::Kernel,
            Command::Duality => ExperimentKind::Duality,
            Command::Universality => ExperimentKind::Universality,
            Command::Acceptance => ExperimentKind::Acceptance,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    });
}

fn run(cli: &Cli) -> stepstone::Result<bool> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| stepstone::Error::InvalidParams(format!("worker pool: {e}")))?;
    }

    let mut config = match &cli.config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::default_for(cli.command.kind()),
    };
    config.kind = cli.command.kind();
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out = out.display().to_string();
    }
    config.validate()?;

    println!("# resolved configuration");
    print!("{}", config.to_config_string());
    println!();

    let report = run_experiment(&config)?;
    print!("{}", report.render());

    let dir = PathBuf::from(&config.out).join(config.kind.as_str());
    let written = write_report(&report, &dir, cli.format)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(report.passed())
}
