use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fwdre_xp::{describe, list, run, RunOptions};

/// Runs the forward reinsurance-investment experiments and writes CSV data
/// (and optionally SVG plots).
#[derive(Parser)]
#[command(name = "fwdre", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the experiment ids.
    List,
    /// Describe an experiment, its outputs and its default configuration.
    Describe { id: String },
    /// Run an experiment.
    Run {
        id: String,
        /// TOML file layered over the experiment defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default: $FWDRE_OUT_DIR, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of simulated paths.
        #[arg(long)]
        paths: Option<usize>,
        /// Simulation time step.
        #[arg(long)]
        dt: Option<f64>,
        /// Also write SVG plots.
        #[arg(long)]
        svg: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (id, result) = match cli.command {
        Command::List => {
            print!("{}", list());
            return ExitCode::SUCCESS;
        }
        Command::Describe { id } => {
            let r = describe(&id).map(|text| print!("{text}"));
            (id, r)
        }
        Command::Run {
            id,
            config,
            out,
            seed,
            paths,
            dt,
            svg,
        } => {
            let opts = RunOptions {
                config,
                out,
                seed,
                paths,
                dt,
                svg,
            };
            let r = run(&id, &opts).map(|s| {
                for f in &s.files {
                    println!("{}", f.display());
                }
            });
            (id, r)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json(Some(&id)));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
