//! `radon`: differentiate and decompose measures on `[0, 1)` from JSON specs.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use radon_core::engine::SplitMode;

#[derive(Parser, Debug)]
#[command(
    name = "radon",
    version,
    about = "Radon-Nikodym derivatives by adaptive partition refinement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Approximate dν^a/dμ and write density.json plus the trace.
    Differentiate(RunArgs),
    /// Split ν into absolutely continuous and singular parts.
    Decompose(RunArgs),
    /// Re-verify a trace file (.csv or .json).
    Diagnose(DiagnoseArgs),
    /// Run the randomized property suites.
    Selfcheck(SelfcheckArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Best,
    All,
}

impl From<Mode> for SplitMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Best => SplitMode::BestOnly,
            Mode::All => SplitMode::AllImproving,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Measure spec for ν.
    #[arg(long)]
    nu: PathBuf,
    /// Measure spec for μ.
    #[arg(long)]
    mu: PathBuf,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long)]
    gain_tol: Option<f64>,
    #[arg(long, value_enum)]
    split_mode: Option<Mode>,
    /// Cutoff on dν/d(μ+ν) above which a cell counts as singular (rational,
    /// e.g. 19/20), or `off`.
    #[arg(long)]
    singular_threshold: Option<String>,
    #[arg(long)]
    checkpoint_stride: Option<usize>,
    #[arg(long)]
    max_cells: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write plot.csv with (round, a_n, l1_error_vs_oracle).
    #[arg(long)]
    emit_plot_data: bool,
    /// Simple-function JSON of the expected density, for the plot column.
    #[arg(long)]
    oracle_density: Option<PathBuf>,
    /// Write zero in the seconds column so traces are reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    trace: PathBuf,
    /// With --mu, also probe uniform integrability on every checkpoint partition.
    #[arg(long, requires = "mu")]
    nu: Option<PathBuf>,
    #[arg(long, requires = "nu")]
    mu: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SelfcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    instances: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Differentiate(a) => commands::run(&a, commands::Kind::Differentiate),
        Command::Decompose(a) => commands::run(&a, commands::Kind::Decompose),
        Command::Diagnose(a) => commands::diagnose(&a),
        Command::Selfcheck(a) => commands::selfcheck(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
