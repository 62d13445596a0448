//! `qdim`: reproducible runs of the quantization-dimension pipelines.
//!
//! Results go to the output directory as CSV and JSON, a one-line summary goes to
//! standard output and logs go to standard error. On failure a JSON object
//! `{"error": {"kind", "message"}}` is printed to standard output and the exit code
//! is nonzero (2 for configuration errors, 1 otherwise).

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use commands::{config_base, Run};
use config::{ExperimentConfig, ModelSource, ScheduleKind};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "qdim", version, about = "Quantization dimension of self-similar measures")]
struct Cli {
    /// Experiment configuration (JSON); flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Numerical tolerance of certified evaluations.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Bundled model name (cantor, dyadic-lebesgue, geom-a05-b033) or model file path.
    #[arg(long, global = true)]
    model: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScheduleArg {
    GeometricWeight,
    EqualHead,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analytic dimension and the truncation sequence t_N.
    Dim,
    /// Error curve and regression estimate of the dimension.
    Estimate,
    /// Mass-threshold antichain, its codebook and error bracket.
    Antichain {
        #[arg(long, conflicts_with = "eps")]
        n: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Minimal metrics against a second model and the truncation continuity table.
    Metrics {
        /// Second model (name or path).
        #[arg(long)]
        against: Option<String>,
        #[arg(long)]
        r: Option<f64>,
    },
    /// Stability along a schedule and the lattice discontinuity demo.
    Stability {
        #[arg(long, value_enum)]
        schedule: Option<ScheduleArg>,
    },
}

fn resolve(cli: &Cli) -> Result<Run, CliError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let mut base = config_base(cli.config.as_deref());
    if let Some(m) = &cli.model {
        config.model = ModelSource::Named(m.clone());
        base = PathBuf::from(".");
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(tol) = cli.tol {
        config.tol = tol;
    }
    match &cli.command {
        Command::Antichain { n, eps } => {
            if n.is_some() || eps.is_some() {
                config.antichain.n = *n;
                config.antichain.eps = *eps;
            }
        }
        Command::Metrics { against, r } => {
            if let Some(a) = against {
                config.metrics.against = Some(ModelSource::Named(a.clone()));
            }
            if let Some(r) = r {
                config.metrics.r = *r;
            }
        }
        Command::Stability { schedule: Some(s) } => {
            config.stability.schedule = match s {
                ScheduleArg::GeometricWeight => ScheduleKind::GeometricWeight,
                ScheduleArg::EqualHead => ScheduleKind::EqualHead,
            };
        }
        _ => {}
    }
    config.validate()?;
    // the echoed configuration carries the models themselves, not references to them
    let (model_src, model) = config.model.resolve(&base)?;
    config.model = model_src;
    if let Some(src) = &config.metrics.against {
        config.metrics.against = Some(src.resolve(&base)?.0);
    }
    Ok(Run { config, model, base })
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let run = resolve(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    info!("{} worker threads, output in {}", pool.current_num_threads(), run.config.out.display());
    pool.install(|| match cli.command {
        Command::Dim => commands::cmd_dim(&run),
        Command::Estimate => commands::cmd_estimate(&run),
        Command::Antichain { .. } => commands::cmd_antichain(&run),
        Command::Metrics { .. } => commands::cmd_metrics(&run),
        Command::Stability { .. } => commands::cmd_stability(&run),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            let err = CliError::Config(first.trim_start_matches("error: ").to_string());
            println!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            log::error!("{err}");
            println!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
