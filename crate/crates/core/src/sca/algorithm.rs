use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::barrier::{solve_convex_subproblem, BarrierSettings, SubproblemSolution};
use super::subproblem::{build_subproblem, inverse_square_distances, ScaMode, SubproblemKind, SubproblemSpec, C_MIN};
use crate::error::{Error, Result};
use crate::scenario::{EpisodeTracks, Placement, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaSettings {
    /// Stop once one round improves the objective by at most this (bps/Hz).
    pub epsilon: f64,
    pub max_outer: usize,
    /// Also required before stopping: every auxiliary satisfies
    /// `|c d^2 - 1| <= tightness_tol`, i.e. the linearization has settled.
    pub tightness_tol: f64,
    pub barrier: BarrierSettings,
    /// Largest window accepted in joint mode.
    pub max_joint_episodes: usize,
    /// Allowed decrease of the objective between rounds.
    pub monotone_tol: f64,
    /// When set, every subproblem and its solution is written here as JSON.
    pub dump_dir: Option<PathBuf>,
}

impl Default for ScaSettings {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_outer: 50,
            tightness_tol: 1e-4,
            barrier: BarrierSettings::default(),
            max_joint_episodes: 20,
            monotone_tol: 1e-9,
            dump_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaTrace {
    pub mode: ScaMode,
    /// Objective before the first round and after every round.
    pub objective: Vec<f64>,
    /// Window placement matching each objective entry.
    pub placements: Vec<Placement>,
    pub solutions: Vec<SubproblemSolution>,
    /// The last subproblem solved.
    pub final_spec: SubproblemSpec,
    pub converged: bool,
}

impl ScaTrace {
    pub fn final_rate(&self) -> f64 {
        *self.objective.last().expect("trace holds the initial objective")
    }

    pub fn final_placement(&self) -> &Placement {
        self.placements.last().expect("trace holds the initial placement")
    }

    pub fn final_solution(&self) -> Option<&SubproblemSolution> {
        self.solutions.last()
    }

    pub fn rounds(&self) -> usize {
        self.solutions.len()
    }
}

#[derive(Serialize)]
struct Dump<'a> {
    round: usize,
    spec: &'a SubproblemSpec,
    solution: &'a SubproblemSolution,
}

fn dump(dir: &PathBuf, round: usize, spec: &SubproblemSpec, solution: &SubproblemSolution) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let kind = match spec.kind {
        SubproblemKind::Joint => "joint",
        SubproblemKind::SingleEpisode => "episode",
        SubproblemKind::Static => "static",
    };
    let path = dir.join(format!("subproblem_{kind}_{:04}_{round:03}.json", spec.first_episode));
    let text = serde_json::to_string_pretty(&Dump { round, spec, solution })?;
    std::fs::write(path, text)?;
    Ok(())
}

fn clamp_lin(c: &mut [Vec<Vec<f64>>], altitude: f64) {
    let hi = if altitude > 0.0 { 1.0 / (altitude * altitude) } else { f64::INFINITY };
    for v in c.iter_mut().flatten().flatten() {
        *v = v.clamp(C_MIN, hi);
    }
}

/// Largest `|c d^2 - 1|` over all (episode, user, UAV) triples.
pub fn tightness(users: &[Vec<crate::scenario::Point>], placement: &Placement, c: &[Vec<Vec<f64>>], altitude: f64) -> f64 {
    let inv = inverse_square_distances(users, placement, altitude);
    inv.iter()
        .flatten()
        .flatten()
        .zip(c.iter().flatten().flatten())
        .map(|(w, c)| (c / w - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Runs the successive convex approximation from `init` (the placement of
/// the mode's window, `[n][m]`; static mode uses its first row).
///
/// Each round solves the surrogate linearized at `c~ = d^-2` of the current
/// positions, so `objective` records the true minimum rate of every
/// placement. Stops when a round gains at most `epsilon` and the round's
/// auxiliaries are within `tightness_tol` of `d^-2`, or after `max_outer`
/// rounds with `converged == false`.
pub fn run_sca(
    tracks: &EpisodeTracks,
    config: &ScenarioConfig,
    mode: &ScaMode,
    init: &Placement,
    settings: &ScaSettings,
) -> Result<ScaTrace> {
    let window = match mode {
        ScaMode::SingleEpisode { episode, .. } => *episode..*episode + 1,
        _ => 0..tracks.num_episodes(),
    };
    if matches!(mode, ScaMode::Joint) && window.len() > settings.max_joint_episodes {
        return Err(Error::config(format!(
            "joint optimization over {} episodes exceeds the limit of {}",
            window.len(),
            settings.max_joint_episodes
        )));
    }
    if window.end > tracks.num_episodes() {
        return Err(Error::domain("episode out of range"));
    }
    if init.len() != window.len() && !(matches!(mode, ScaMode::Static) && !init.is_empty()) {
        return Err(Error::domain(format!("initial placement must cover {} episodes", window.len())));
    }
    let users = &tracks.users[window.clone()];
    let mut start: Placement = match mode {
        ScaMode::Static => vec![init[0].clone(); window.len()],
        _ => init.clone(),
    };
    let h = config.altitude();

    let mut lin = inverse_square_distances(users, &start, h);
    clamp_lin(&mut lin, h);
    let mut spec = build_subproblem(tracks, config, &lin, mode, &start)?;
    let repaired = spec.placement(&spec.start);
    if repaired != start {
        start = repaired;
        lin = inverse_square_distances(users, &start, h);
        clamp_lin(&mut lin, h);
        spec = build_subproblem(tracks, config, &lin, mode, &start)?;
    }

    let mut objective = vec![spec.objective_at(&start)];
    let mut placements = vec![start];
    let mut solutions = Vec::new();
    let mut converged = false;

    for round in 1..=settings.max_outer {
        let sol = solve_convex_subproblem(&spec, &settings.barrier)?;
        if let Some(dir) = &settings.dump_dir {
            dump(dir, round, &spec, &sol)?;
        }
        let prev = *objective.last().unwrap();
        // The surrogate under-estimates every rate, so the rate at the new
        // positions is at least the surrogate optimum.
        let rate = spec.objective_at(&sol.positions);
        if rate < prev - settings.monotone_tol {
            return Err(Error::Internal(format!(
                "objective decreased from {prev} to {rate} in round {round}"
            )));
        }
        objective.push(rate);
        placements.push(sol.positions.clone());
        let tight = tightness(&spec.users, &sol.positions, &sol.c, h);
        solutions.push(sol);
        if rate - prev <= settings.epsilon && tight <= settings.tightness_tol {
            converged = true;
            break;
        }
        let mut next = inverse_square_distances(users, placements.last().unwrap(), h);
        clamp_lin(&mut next, h);
        spec = build_subproblem(tracks, config, &next, mode, placements.last().unwrap())?;
    }

    Ok(ScaTrace {
        mode: mode.clone(),
        objective,
        placements,
        solutions,
        final_spec: spec,
        converged,
    })
}
