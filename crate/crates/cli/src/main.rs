//! `adaptrack` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use adaptrack::{PatchKind, ProblemKind, RandomizerKind};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "adaptrack", version, about = "Parameter homotopy solver with adaptive patches and randomization")]
struct Cli {
    /// Worker threads for path tracking (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve at random parameters and write the start set.
    Abinitio(AbInitioArgs),
    /// Track a start set to target parameters.
    Solve(SolveArgs),
    /// Compare the six strategy combinations over synthetic instances.
    Bench(BenchArgs),
    /// Write a synthetic instance with known ground truth.
    Instance(InstanceArgs),
    /// Track the twisted-cubic demo paths under every strategy pair.
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemArg {
    TwistedCubic,
    FivePoint,
    SixPoint,
    /// A system read from `--system`.
    File,
}

impl ProblemArg {
    pub fn kind(self) -> Option<ProblemKind> {
        match self {
            ProblemArg::TwistedCubic => Some(ProblemKind::TwistedCubic),
            ProblemArg::FivePoint => Some(ProblemKind::FivePoint),
            ProblemArg::SixPoint => Some(ProblemKind::SixPoint),
            ProblemArg::File => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PatchArg {
    Fixed,
    Orthogonal,
    Coordwise,
}

impl From<PatchArg> for PatchKind {
    fn from(p: PatchArg) -> Self {
        match p {
            PatchArg::Fixed => PatchKind::Fixed,
            PatchArg::Orthogonal => PatchKind::Orthogonal,
            PatchArg::Coordwise => PatchKind::CoordinateWise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RandomizerArg {
    Fixed,
    Pinv,
    Leverage,
}

impl From<RandomizerArg> for RandomizerKind {
    fn from(r: RandomizerArg) -> Self {
        match r {
            RandomizerArg::Fixed => RandomizerKind::Fixed,
            RandomizerArg::Pinv => RandomizerKind::Pseudoinverse,
            RandomizerArg::Leverage => RandomizerKind::LeverageScore,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct ProblemOpts {
    #[arg(long, value_enum)]
    pub problem: ProblemArg,
    /// System JSON, required with `--problem file`.
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Seed of every random choice; falls back to ADAPTRACK_SEED.
    #[arg(long, env = "ADAPTRACK_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct StrategyOpts {
    #[arg(long, value_enum, default_value = "coordwise")]
    pub patch: PatchArg,
    #[arg(long, value_enum, default_value = "leverage")]
    pub randomizer: RandomizerArg,
    /// Rescale adaptive patches to minimize the mixed condition number.
    #[arg(long)]
    pub optimal_scaling: bool,
    /// Abandon paths that look headed for nonreal endpoints.
    #[arg(long, value_enum, default_value = "off")]
    pub truncate: Toggle,
}

#[derive(Debug, Args)]
pub struct AbInitioArgs {
    #[command(flatten)]
    pub problem: ProblemOpts,
    /// Start set JSON to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemOpts,
    #[command(flatten)]
    pub strategy: StrategyOpts,
    /// Start set JSON; computed on the fly when absent.
    #[arg(long)]
    pub start: Option<PathBuf>,
    /// Instance JSON with the target; a synthetic one is drawn when absent.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Per-step CSV trace of every path.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Solutions JSON to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with status 2 if any path fails.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub problem: ProblemOpts,
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    #[arg(long)]
    pub start: Option<PathBuf>,
    /// CSV table to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    #[command(flatten)]
    pub problem: ProblemOpts,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Per-step CSV trace with one block per strategy pair.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Rescale adaptive patches to minimize the mixed condition number.
    #[arg(long)]
    pub optimal_scaling: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(commands::EXIT_INVALID);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(commands::EXIT_INVALID);
        }
    }
    let result = match cli.command {
        Command::Abinitio(a) => commands::abinitio(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Instance(a) => commands::instance(&a),
        Command::Demo(a) => commands::demo(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
