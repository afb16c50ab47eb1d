use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod output;

#[derive(Parser)]
#[command(name = "manicon", version, about = "Delayed adaptive consensus of networked two-link arms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a preset or a scenario file and write CSV output.
    Run(RunArgs),
    /// Check a scenario without running it.
    Validate {
        /// Preset name or path to a JSON scenario.
        scenario: String,
        /// Print the normalized scenario JSON on stdout.
        #[arg(long)]
        emit: bool,
    },
    /// Run one row per parameter value and write sweep.csv.
    Sweep(SweepArgs),
    /// List bundled presets.
    List,
}

#[derive(clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// rk4 or euler
    #[arg(long)]
    pub integrator: Option<String>,
}

#[derive(clap::Args)]
pub struct RunArgs {
    /// Preset name or path to a JSON scenario.
    pub scenario: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Worker threads for sweep rows (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Consensus tolerance for settling times (m).
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Write every n-th sample to trace.csv.
    #[arg(long, default_value_t = 1)]
    pub every: usize,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SweepKind {
    /// manipulability index alpha
    Alpha,
    /// servo integral gain
    Ki,
    /// teleoperator damping scale
    Damping,
}

#[derive(clap::Args)]
pub struct SweepArgs {
    pub kind: SweepKind,
    /// Base scenario; defaults to the matching preset.
    #[arg(long)]
    pub base: Option<String>,
    /// Comma-separated parameter values.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(args) => commands::run(&args),
        Command::Validate { scenario, emit } => commands::validate(&scenario, emit),
        Command::Sweep(args) => commands::sweep(&args),
        Command::List => {
            for name in manicon_core::presets::NAMES {
                println!("{name}");
            }
            Ok(())
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}

/// The error chain on one line. Core errors already print their source, so
/// a link that the previous message ends with is skipped.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.ends_with(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}
