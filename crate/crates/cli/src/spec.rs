//! Experiment descriptions and their default scenarios.

use std::path::{Path, PathBuf};

use skycomp::planners::PlanMode;
use skycomp::scenario::{RawConfig, ScenarioConfig};

use crate::error::{CliError, CliResult};

/// Reference gain of the trajectory experiments (dB). The setup quotes
/// `-40 dBm` for the power at 1 m; referred to 1 W this is `-70 dB`.
pub const TRAJECTORY_REF_GAIN_DB: f64 = -70.0;

/// Reference gain of the single-drop bound experiments (dB).
pub const DROP_REF_GAIN_DB: f64 = -40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    BoundsTightness,
    Convergence,
    SpeedSweep,
    GroupingSweep,
    TrajectorySnapshot,
    AppendixStats,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::BoundsTightness,
        ExperimentKind::Convergence,
        ExperimentKind::SpeedSweep,
        ExperimentKind::GroupingSweep,
        ExperimentKind::TrajectorySnapshot,
        ExperimentKind::AppendixStats,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::BoundsTightness => "bounds_tightness",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::SpeedSweep => "speed_sweep",
            ExperimentKind::GroupingSweep => "grouping_sweep",
            ExperimentKind::TrajectorySnapshot => "trajectory_snapshot",
            ExperimentKind::AppendixStats => "appendix_stats",
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name())
    }

    /// Scenario used when no configuration file is given.
    pub fn default_config(&self) -> RawConfig {
        match self {
            ExperimentKind::BoundsTightness | ExperimentKind::AppendixStats => drop_preset(),
            ExperimentKind::GroupingSweep => RawConfig {
                n_episodes: 5,
                ..trajectory_preset()
            },
            _ => trajectory_preset(),
        }
    }

    pub fn default_trials(&self) -> usize {
        match self {
            ExperimentKind::BoundsTightness => 5000,
            ExperimentKind::AppendixStats => 10_000,
            ExperimentKind::Convergence => 500,
            ExperimentKind::SpeedSweep | ExperimentKind::GroupingSweep => 2000,
            ExperimentKind::TrajectorySnapshot => 0,
        }
    }

    pub fn default_modes(&self) -> Vec<PlanMode> {
        match self {
            ExperimentKind::Convergence => vec![PlanMode::FullInformation],
            ExperimentKind::GroupingSweep => vec![PlanMode::Static],
            _ => ALL_MODES.to_vec(),
        }
    }

    pub fn default_init(&self) -> InitKind {
        match self {
            ExperimentKind::Convergence => InitKind::Random,
            _ => InitKind::Centroid,
        }
    }
}

pub const ALL_MODES: [PlanMode; 3] = [PlanMode::FullInformation, PlanMode::CurrentInformation, PlanMode::Static];

/// Ten UAVs and one group of six users dropped in a 100 m square, one episode.
pub fn drop_preset() -> RawConfig {
    RawConfig {
        k: 6,
        l: 1,
        n_episodes: 1,
        arena_m: [0.0, 100.0, 0.0, 100.0],
        ref_gain_db: DROP_REF_GAIN_DB,
        ..RawConfig::default()
    }
}

/// Ten UAVs, 18 users in three groups moving in a 500 m square, ten episodes.
pub fn trajectory_preset() -> RawConfig {
    RawConfig {
        ref_gain_db: TRAJECTORY_REF_GAIN_DB,
        ..RawConfig::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Centroid,
    Random,
}

pub fn parse_mode(s: &str) -> CliResult<Vec<PlanMode>> {
    match s {
        "full" => Ok(vec![PlanMode::FullInformation]),
        "current" => Ok(vec![PlanMode::CurrentInformation]),
        "static" => Ok(vec![PlanMode::Static]),
        "all" => Ok(ALL_MODES.to_vec()),
        other => Err(CliError::Config(format!("unknown mode {other:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Scenario; its seed is replaced by `seed`.
    pub config: RawConfig,
    /// UAV speed limits (m/s) of the speed sweep.
    pub speeds: Vec<f64>,
    /// Group counts of the grouping sweep.
    pub groups: Vec<usize>,
    pub out_dir: PathBuf,
    /// Monte-Carlo trials (per episode and group where applicable).
    pub trials: usize,
    pub seed: u64,
    pub modes: Vec<PlanMode>,
    pub init: InitKind,
    /// Episode stride of trajectory snapshots.
    pub stride: usize,
    pub dump_subproblems: bool,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, out_dir: impl AsRef<Path>) -> Self {
        let config = kind.default_config();
        ExperimentSpec {
            kind,
            seed: config.seed,
            config,
            speeds: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            groups: vec![2, 3, 6, 9],
            out_dir: out_dir.as_ref().to_path_buf(),
            trials: kind.default_trials(),
            modes: kind.default_modes(),
            init: kind.default_init(),
            stride: 1,
            dump_subproblems: false,
        }
    }

    /// The scenario with the experiment seed applied.
    pub fn effective_raw(&self) -> RawConfig {
        RawConfig {
            seed: self.seed,
            ..self.config.clone()
        }
    }

    pub fn scenario(&self) -> CliResult<ScenarioConfig> {
        Ok(ScenarioConfig::new(self.effective_raw())?)
    }

    pub fn output_path(&self) -> PathBuf {
        self.out_dir.join(self.kind.file_name())
    }

    pub fn validate(&self) -> CliResult<()> {
        let raw = &self.config;
        let fail = |m: String| Err(CliError::Config(m));
        if self.modes.is_empty() {
            return fail("at least one planner mode is required".into());
        }
        match self.kind {
            kind if kind != ExperimentKind::TrajectorySnapshot && self.trials < 100 => {
                fail(format!("need at least 100 trials, got {}", self.trials))
            }
            ExperimentKind::Convergence if self.modes.contains(&PlanMode::CurrentInformation) => {
                fail("convergence traces need the full or static mode".into())
            }
            ExperimentKind::SpeedSweep
                if self.speeds.is_empty() || self.speeds.iter().any(|v| !(v.is_finite() && *v >= 0.0)) =>
            {
                fail("speeds must be a non-empty list of nonnegative values".into())
            }
            ExperimentKind::GroupingSweep => {
                let total = raw.k * raw.l;
                if self.groups.is_empty() {
                    return fail("group counts must not be empty".into());
                }
                if let Some(l) = self.groups.iter().find(|l| **l == 0 || !total.is_multiple_of(**l)) {
                    return fail(format!("group count {l} does not divide the {total} users"));
                }
                if self.groups.iter().all(|l| total / l >= raw.m) {
                    return fail(format!("every group count leaves at least M = {} users per group", raw.m));
                }
                Ok(())
            }
            ExperimentKind::TrajectorySnapshot if self.stride == 0 => fail("stride must be positive".into()),
            _ => Ok(()),
        }
    }
}
