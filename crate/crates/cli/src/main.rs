use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use memlearn::harness::{self, ExperimentConfig, Format, MetricsReport};
use memlearn::trace::{generate, save_any_trace, TraceSpec};

#[derive(Parser)]
#[command(
    name = "memlearn",
    version,
    about = "Run cache, prefetching and storage placement experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Table,
    Structured,
    Plotdata,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Table => Format::Table,
            OutFormat::Structured => Format::Structured,
            OutFormat::Plotdata => Format::Plotdata,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and emit its report.
    Run {
        config: PathBuf,
        /// Directory for the report; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: OutFormat,
        /// Replace the experiment seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a synthetic trace from a TOML trace spec.
    GenTrace { spec: PathBuf, path: PathBuf },
    /// Ratios of every metric against a baseline policy.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        baseline: String,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            format,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = harness::run_experiment(&cfg)?;
            match out.or(cfg.output.clone()) {
                Some(dir) => {
                    let path = harness::emit(&report, format.into(), &dir)?;
                    log::info!("wrote {}", path.display());
                }
                None => print!("{}", harness::render(&report, format.into())?),
            }
        }
        Command::GenTrace { spec, path } => {
            let text = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let spec: TraceSpec = toml::from_str(&text)?;
            let trace = generate(&spec)?;
            save_any_trace(&trace, &path)?;
            log::info!("wrote {} events to {}", trace.len(), path.display());
        }
        Command::Compare { reports, baseline } => {
            let loaded = reports
                .iter()
                .map(|p| MetricsReport::load(p).with_context(|| format!("reading {}", p.display())))
                .collect::<anyhow::Result<Vec<_>>>()?;
            print!("{}", harness::compare(&loaded, &baseline)?);
        }
    }
    Ok(())
}
