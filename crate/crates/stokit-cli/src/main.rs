//! stokit command-line harness.
//!
//! Subcommands map one-to-one onto the experiment registry; global flags
//! override config-file values, which override defaults. The master seed
//! resolves as flag > STOKIT_SEED > config > 42. Exit codes: 0 success,
//! 1 runtime failure (diagnostic JSON on stderr), 2 usage or validation.

mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{edit_distance, parse_config, RunConfig};
use experiments::{resolve, run_experiment, EXPERIMENTS};
use output::Format;

#[derive(Parser)]
#[command(
    name = "stokit",
    about = "Stochastic dynamics toolkit: SDE simulation and cross-validation experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration file (sectioned key = value text).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (precedence: this flag > STOKIT_SEED > config > 42).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of Monte Carlo paths.
    #[arg(long, global = true)]
    paths: Option<usize>,

    /// Time step.
    #[arg(long, global = true)]
    dt: Option<f64>,

    /// Final time.
    #[arg(long = "t-final", global = true)]
    t_final: Option<f64>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Artifact format.
    #[arg(long, global = true, value_parser = ["csv", "json", "both"])]
    format: Option<String>,

    /// Worker threads for ensemble loops (default: all processors).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trajectory or ensemble of the configured model.
    Simulate,
    /// Strong-order study of a scheme against a closed form.
    Order,
    /// Ito-calculus identity checks (isometries, Doob bound, sup bound).
    Calculus,
    /// Mean-energy balance series and Lorenz bound checks.
    Moments,
    /// Escape probability, mean residence time, first-exit Monte Carlo.
    Exit,
    /// Circle-manifold tangency, characteristics zero set, invariance drift.
    Manifold,
    /// Cocycle and stationary-orbit residuals.
    Rds,
    /// List registered experiments (optionally check one name).
    List {
        /// Name to look up; prints the nearest registered name on a miss.
        name: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("error: --workers must be >= 1");
            return ExitCode::from(2);
        }
        // Build the global pool once; reductions are order-fixed, so the
        // worker count never changes results.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let workers = cli.workers.unwrap_or_else(rayon::current_num_threads);

    let experiment = match &cli.command {
        Command::Simulate => "simulate",
        Command::Order => "order",
        Command::Calculus => "calculus",
        Command::Moments => "moments",
        Command::Exit => "exit",
        Command::Manifold => "manifold",
        Command::Rds => "rds",
        Command::List { name } => {
            return match name {
                None => {
                    for e in EXPERIMENTS {
                        println!("{e}");
                    }
                    ExitCode::SUCCESS
                }
                Some(n) if EXPERIMENTS.contains(&n.as_str()) => {
                    println!("{n}");
                    ExitCode::SUCCESS
                }
                Some(n) => {
                    let nearest = EXPERIMENTS
                        .iter()
                        .min_by_key(|e| edit_distance(n, e))
                        .expect("registry is nonempty");
                    eprintln!("unknown experiment '{n}'; did you mean '{nearest}'?");
                    ExitCode::from(2)
                }
            };
        }
    };

    let config: Option<RunConfig> = match &cli.config {
        None => None,
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read config {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            };
            match parse_config(&text) {
                Ok(c) => Some(c),
                Err(errors) => {
                    eprintln!("error: invalid config {}:", path.display());
                    for e in errors {
                        eprintln!("  {e}");
                    }
                    return ExitCode::from(2);
                }
            }
        }
    };

    let format_flag = cli.format.as_deref().and_then(Format::parse);
    let resolved = match resolve(
        experiment,
        config.as_ref(),
        cli.seed,
        cli.paths,
        cli.dt,
        cli.t_final,
        format_flag,
    ) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let out_dir = config
        .as_ref()
        .and_then(|c| c.run.out.clone())
        .map(PathBuf::from)
        .filter(|_| cli.out.as_os_str() == "out")
        .unwrap_or(cli.out.clone());

    match run_experiment(&resolved, &out_dir, workers) {
        Ok(manifest) => {
            let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            if std::fs::write(out_dir.join("manifest.json"), format!("{text}\n")).is_err() {
                eprintln!("error: cannot write manifest");
                return ExitCode::from(1);
            }
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            let diag = serde_json::json!({
                "experiment": experiment,
                "error": f.message,
            });
            eprintln!("{diag}");
            ExitCode::from(if f.usage { 2 } else { 1 })
        }
    }
}
