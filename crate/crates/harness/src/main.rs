use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maxent_harness::eval::{eval_policy, load_env, Metric, StoredPolicy};
use maxent_harness::export::{export_figure, Figure};
use maxent_harness::output::{csv_bytes, fmt_float, write_atomic};
use maxent_harness::{run_experiment, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "maxent", version, about = "Maximum-entropy exploration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every algorithm of a config on every seed.
    Run {
        config: PathBuf,
        /// Overrides the output directory of the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides the worker count of the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print metrics of a stored policy as CSV.
    Eval {
        /// Config file holding an [env] table.
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        /// Comma-separated subset of ve, ve_averaged, te, mtee_gap.
        #[arg(long, default_value = "ve,ve_averaged")]
        metrics: String,
    },
    /// Build plot-ready CSV from a run directory.
    Export {
        /// fig1 (alias state-visits) or curves.
        #[arg(long)]
        figure: String,
        #[arg(long)]
        results: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config, output, workers } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(o) = output {
                cfg.output = o;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let report = run_experiment(&cfg)?;
            eprintln!("{} replicates written to {}", report.replicates.len(), report.output.display());
        }
        Command::Eval { env, policy, metrics } => {
            let metrics = metrics.split(',').map(|m| m.trim().parse()).collect::<Result<Vec<Metric>, _>>()?;
            let mdp = load_env(&env)?.build()?;
            let stored = StoredPolicy::load(&policy)?;
            let values = eval_policy(&mdp, &stored, &metrics)?;
            let rows = values.into_iter().map(|(k, v)| vec![k, fmt_float(v)]);
            print_bytes(&csv_bytes(&["metric", "value"], rows));
        }
        Command::Export { figure, results, output } => {
            let bytes = export_figure(&results, figure.parse::<Figure>()?)?;
            match output {
                Some(path) => write_atomic(&path, &bytes)?,
                None => print_bytes(&bytes),
            }
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let labels: Vec<&str> = cfg.algorithms.iter().map(|a| a.label.as_str()).collect();
            println!(
                "{}: {} on {} with {} seeds, budget {} steps",
                cfg.name,
                labels.join(", "),
                cfg.env.label(),
                cfg.seeds.len(),
                cfg.budget
            );
        }
    }
    Ok(())
}

fn print_bytes(bytes: &[u8]) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(bytes);
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
