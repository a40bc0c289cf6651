//! `semnet` — experiment runner for the federated-edge / knowledge-graph
//! compression simulator.

use semnet_cli::{config, experiments, pubmed};

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "semnet", about = "Federated edge training and semantic compression experiments", disable_version_flag = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file and write its CSV.
    Run {
        /// Path to a `key = value` experiment config.
        config: PathBuf,
        /// Validate and print the effective config without running.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run the gradient verification suite with default settings.
    Gradcheck {
        /// CSV output path.
        #[arg(long, default_value = "gradcheck.csv")]
        output: PathBuf,
    },
    /// Convert the native Pubmed-Diabetes tab files to .content/.cites.
    ConvertPubmed {
        /// Directory holding the native NODE.paper/DIRECTED.cites tab files.
        native_dir: PathBuf,
        /// Output directory for pubmed.content and pubmed.cites.
        out_dir: PathBuf,
    },
    /// Print the version.
    Version,
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, dry_run } => {
            let cfg = config::parse_config(&config)?;
            if dry_run {
                cfg.validate()?;
                print!("{}", cfg.serialize());
            } else {
                experiments::run_experiment(&cfg)?;
            }
        }
        Command::Gradcheck { output } => {
            let mut cfg = config::ExperimentConfig::new(config::ExperimentKind::GradCheck);
            cfg.output = output;
            experiments::run_experiment(&cfg)?;
        }
        Command::ConvertPubmed { native_dir, out_dir } => {
            let stats = pubmed::convert_pubmed(&native_dir, &out_dir)?;
            println!(
                "converted {} nodes, {} edges, {} classes into {}",
                stats.nodes,
                stats.edges,
                stats.classes,
                out_dir.display()
            );
        }
        Command::Version => {
            println!("semnet {}", env!("CARGO_PKG_VERSION"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
