//! Experiment runner: ingests a scenario, runs one of the bound, optimizer or
//! statistics experiments and writes a deterministic CSV.

pub mod error;
pub mod experiments;
pub mod output;
pub mod spec;

pub use error::{CliError, CliResult};
pub use experiments::{
    run, run_appendix_stats, run_bounds_tightness, run_convergence, run_grouping_sweep, run_speed_sweep,
    run_table, run_trajectory_snapshot,
};
pub use output::Table;
pub use spec::{ExperimentKind, ExperimentSpec, InitKind};
