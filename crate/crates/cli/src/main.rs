//! Command-line experiment runner for decentralized hypothesis testing.
//!
//! Verbs:
//! - `run <config.toml>`: execute one scenario, writing error curves, the
//!   analytic exponent report, estimation traces, optional per-trial
//!   traces, and a manifest with content hashes.
//! - `sweep <config.toml> --axis <name> --values a,b,c`: one run per value.
//! - `analyze <errors.csv> --exponent-window <w>`: per-node slope fits.
//! - `graph gen|inspect`: network generation and chain diagnostics.
//!
//! Exit codes: 0 on success, 2 on configuration validation failure.

mod analyze;
mod config;
mod formats;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use socialdetect_core::graph_markov::{generate_scale_free, imbalance, ImbalanceNorm};

use crate::config::{ExperimentConfig, ValidationReport};
use crate::formats::GraphDoc;

#[derive(Parser)]
#[command(name = "socialdetect", version, about = "Decentralized detection experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario described by a TOML config.
    Run {
        config: PathBuf,
    },
    /// Run one scenario per value of a config field.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. `3,4,5` or `0,1,5,oracle`.
        #[arg(long)]
        values: String,
    },
    /// Fit empirical exponents on a previously written errors.csv.
    Analyze {
        csv: PathBuf,
        #[arg(long = "exponent-window", default_value_t = 20)]
        exponent_window: usize,
        /// Column to fit: alpha, beta, or bayes_risk.
        #[arg(long, default_value = "beta")]
        column: String,
        /// Minimum observed events for a cell to enter the fit.
        #[arg(long, default_value_t = 1.0)]
        min_count: f64,
    },
    /// Network generation and inspection.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Generate a scale-free network (bidirectional edges, self-loops).
    Gen {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        attach: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the Markov-chain profile of a graph file.
    Inspect {
        file: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err:#}");
            if err.is::<ValidationReport>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let base_dir = parent_of(&config);
            let parsed = load_config(&config)?;
            let manifest = scenario::run_scenario(&parsed, &base_dir)?;
            println!("{}", manifest.display());
            Ok(())
        }
        Command::Sweep { config, axis, values } => {
            let base_dir = parent_of(&config);
            let parsed = load_config(&config)?;
            let values: Vec<String> =
                values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            let index = scenario::sweep(&parsed, &base_dir, &axis, &values)?;
            println!("{}", index.display());
            Ok(())
        }
        Command::Analyze { csv, exponent_window, column, min_count } => {
            let report = analyze::analyze(&csv, exponent_window, &column, min_count)?;
            println!("{report}");
            Ok(())
        }
        Command::Graph { command } => graph_command(command),
    }
}

fn parent_of(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path)
        .map_err(|e| ValidationReport(vec![format!("{e:#}")]).into())
}

fn graph_command(command: GraphCommand) -> Result<()> {
    match command {
        GraphCommand::Gen { nodes, attach, seed, out } => {
            let graph = generate_scale_free(nodes, attach, seed).map_err(|e| {
                anyhow::Error::from(ValidationReport(vec![e.to_string()]))
            })?;
            GraphDoc::from_graph(&graph).save(&out)?;
            println!("{}", out.display());
            Ok(())
        }
        GraphCommand::Inspect { file } => {
            let doc = GraphDoc::load(&file)?;
            let w = doc.weight_matrix()?;
            let profile = w.spectral_profile();
            let report = serde_json::json!({
                "n": w.n(),
                "edges": doc.edges.len(),
                "irreducible": profile.irreducible,
                "aperiodic": profile.aperiodic,
                "period": profile.period,
                "reversible": profile.reversible,
                "rho": profile.rho,
                "pi": profile.pi,
                "imbalance_l2": profile.pi.as_deref().map(|pi| imbalance(pi, ImbalanceNorm::L2)),
                "imbalance_tv": profile.pi.as_deref().map(|pi| imbalance(pi, ImbalanceNorm::Tv)),
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}
