use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use skycomp::scenario::RawConfig;
use skycomp_cli::spec::parse_mode;
use skycomp_cli::{run, CliError, CliResult, ExperimentKind, ExperimentSpec, InitKind};

#[derive(Parser)]
#[command(name = "skycomp", version, about = "UAV placement experiments with deterministic CSV output")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Closed-form rate bounds against Monte-Carlo rates on a random drop.
    Bounds(Common),
    /// Optimizer trace from a random initial placement.
    Converge(Common),
    /// Min rate of each planner over UAV speed limits.
    SweepSpeed(Common),
    /// Min rate over the number of user groups.
    SweepGroups(Common),
    /// Random-matrix statistics against their closed forms.
    Stats(Common),
    /// Per-episode user and UAV positions of each planner.
    Snapshot(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    Current,
    Static,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    Centroid,
    Random,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON; defaults to the experiment's built-in scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for user tracks, drops, initial placements and Monte Carlo;
    /// defaults to the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo trials.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum)]
    init: Option<Init>,
    /// UAV speed limits in m/s for `sweep-speed`.
    #[arg(long, value_delimiter = ',')]
    speeds: Option<Vec<f64>>,
    /// Group counts for `sweep-groups`.
    #[arg(long, value_delimiter = ',')]
    groups: Option<Vec<usize>>,
    /// Episode stride for `snapshot`.
    #[arg(long)]
    stride: Option<usize>,
    /// Write every convex subproblem and its solution as JSON.
    #[arg(long)]
    dump_subproblems: bool,
}

fn build(kind: ExperimentKind, c: Common) -> CliResult<ExperimentSpec> {
    let mut spec = ExperimentSpec::new(kind, &c.out);
    if let Some(path) = &c.config {
        spec.config = RawConfig::load(path)?;
        spec.seed = spec.config.seed;
    }
    if let Some(seed) = c.seed {
        spec.seed = seed;
    }
    if let Some(trials) = c.trials {
        spec.trials = trials;
    }
    if let Some(mode) = c.mode {
        let name = match mode {
            Mode::Full => "full",
            Mode::Current => "current",
            Mode::Static => "static",
            Mode::All => "all",
        };
        spec.modes = parse_mode(name)?;
    }
    if let Some(init) = c.init {
        spec.init = match init {
            Init::Centroid => InitKind::Centroid,
            Init::Random => InitKind::Random,
        };
    }
    if let Some(speeds) = c.speeds {
        spec.speeds = speeds;
    }
    if let Some(groups) = c.groups {
        spec.groups = groups;
    }
    if let Some(stride) = c.stride {
        spec.stride = stride;
    }
    spec.dump_subproblems = c.dump_subproblems;
    Ok(spec)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match cli.verb {
        Verb::Bounds(c) => (ExperimentKind::BoundsTightness, c),
        Verb::Converge(c) => (ExperimentKind::Convergence, c),
        Verb::SweepSpeed(c) => (ExperimentKind::SpeedSweep, c),
        Verb::SweepGroups(c) => (ExperimentKind::GroupingSweep, c),
        Verb::Stats(c) => (ExperimentKind::AppendixStats, c),
        Verb::Snapshot(c) => (ExperimentKind::TrajectorySnapshot, c),
    };
    match build(kind, common).and_then(|spec| run(&spec)) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("skycomp: {e}");
            ExitCode::from(exit_byte(&e))
        }
    }
}

fn exit_byte(e: &CliError) -> u8 {
    e.exit_code() as u8
}
