//! End-to-end deployment planners for the three information scenarios, and
//! Monte-Carlo evaluation of the resulting UAV trajectories.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::{average_min_rate, min_average_lower_bound, McOptions, RateKind};
use crate::rng::{substream, StreamTag};
use crate::sca::{run_sca, ScaMode, ScaSettings, ScaTrace};
use crate::scenario::{displacement_budget, EpisodeTracks, Placement, Point, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlanMode {
    /// Joint optimization over all episodes with the whole user trajectory known.
    FullInformation,
    /// Episode by episode, each anchored to the previous placement.
    CurrentInformation,
    /// One fixed placement for all episodes.
    Static,
}

impl PlanMode {
    pub fn label(&self) -> &'static str {
        match self {
            PlanMode::FullInformation => "full",
            PlanMode::CurrentInformation => "current",
            PlanMode::Static => "static",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitStrategy {
    /// Every UAV at the users' centroid plus uniform jitter in `[-jitter, jitter]^2`.
    Centroid { jitter: f64 },
    /// Uniform over the arena, then a random walk within 90% of each budget.
    Random,
    /// Explicit placement, `[n][m]` (one row suffices for static plans).
    Given(Placement),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    pub init: InitStrategy,
    /// Seed for randomized initial placements; the scenario seed if unset.
    pub seed: Option<u64>,
    pub sca: ScaSettings,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            init: InitStrategy::Centroid { jitter: 10.0 },
            seed: None,
            sca: ScaSettings::default(),
        }
    }
}

impl PlanOptions {
    pub fn warm(placement: Placement) -> Self {
        Self {
            init: InitStrategy::Given(placement),
            ..Self::default()
        }
    }
}

/// Outcome of the optimizer on one episode window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSolve {
    pub first_episode: usize,
    pub rounds: usize,
    pub objective: f64,
    pub converged: bool,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub mode: PlanMode,
    /// UAV positions, `[n][m]`.
    pub uav_tracks: Placement,
    /// Smallest episode-averaged lower-bound rate at `uav_tracks`.
    pub bound_min_rate: f64,
    pub mc_min_rate: Option<f64>,
    pub mc_std_error: Option<f64>,
    /// Optimizer traces: one for joint and static plans, one per episode for
    /// receding-horizon plans.
    pub traces: Vec<ScaTrace>,
    pub episodes: Vec<EpisodeSolve>,
    /// Monte-Carlo objective of every trace iterate, as `(mean, std_error)`.
    pub iteration_mc: Vec<(f64, f64)>,
}

impl PlanResult {
    /// Objective after every optimizer round, starting from the initial
    /// placement (joint and static plans).
    pub fn iteration_bounds(&self) -> Vec<f64> {
        match self.traces.as_slice() {
            [t] if self.mode != PlanMode::CurrentInformation => t.objective.clone(),
            _ => Vec::new(),
        }
    }
}

fn centroid(users: &[Vec<Point>]) -> Point {
    let (mut x, mut y, mut c) = (0.0, 0.0, 0.0);
    for p in users.iter().flatten() {
        x += p.x;
        y += p.y;
        c += 1.0;
    }
    Point::new(x / c, y / c)
}

fn seed_of(options: &PlanOptions, config: &ScenarioConfig) -> u64 {
    options.seed.unwrap_or(config.seed())
}

fn centroid_row(users: &[Vec<Point>], config: &ScenarioConfig, jitter: f64, seed: u64) -> Vec<Point> {
    let c = centroid(users);
    let mut rng = substream(seed, StreamTag::InitialPlacement, &[0]);
    (0..config.num_uavs())
        .map(|_| {
            if jitter > 0.0 {
                Point::new(
                    c.x + rng.random_range(-jitter..=jitter),
                    c.y + rng.random_range(-jitter..=jitter),
                )
            } else {
                c
            }
        })
        .collect()
}

/// Random initial trajectory: uniform first placement, then steps of
/// uniform direction and length in `[0, 0.9 D]`, reflected at the arena edge.
pub fn random_placement(config: &ScenarioConfig, num_episodes: usize, seed: u64) -> Placement {
    let arena = config.arena();
    let budgets = displacement_budget(config);
    let mut rng = substream(seed, StreamTag::InitialPlacement, &[1]);
    let mut out: Placement = Vec::with_capacity(num_episodes);
    out.push((0..config.num_uavs()).map(|_| arena.sample(&mut rng)).collect());
    for n in 1..num_episodes {
        let row = out[n - 1]
            .iter()
            .enumerate()
            .map(|(m, p)| {
                let d = budgets.get(m, n - 1);
                let len = if d > 0.0 { rng.random_range(0.0..0.9 * d) } else { 0.0 };
                let theta = rng.random_range(0.0..2.0 * PI);
                let q = arena.reflect(Point::new(p.x + len * theta.cos(), p.y + len * theta.sin()));
                // Reflection never lengthens a step.
                if d > 0.0 { q } else { *p }
            })
            .collect();
        out.push(row);
    }
    out
}

fn initial_placement(
    tracks: &EpisodeTracks,
    config: &ScenarioConfig,
    options: &PlanOptions,
    episodes: usize,
) -> Result<Placement> {
    let seed = seed_of(options, config);
    match &options.init {
        InitStrategy::Centroid { jitter } => {
            let row = centroid_row(&tracks.users[..episodes], config, *jitter, seed);
            Ok(vec![row; episodes])
        }
        InitStrategy::Random => Ok(random_placement(config, episodes, seed)),
        InitStrategy::Given(p) => {
            if p.is_empty() || p.iter().any(|r| r.len() != config.num_uavs()) {
                return Err(Error::config(format!("initial placement must hold {} UAVs per row", config.num_uavs())));
            }
            if p.len() >= episodes {
                Ok(p[..episodes].to_vec())
            } else if p.len() == 1 {
                Ok(vec![p[0].clone(); episodes])
            } else {
                Err(Error::config(format!("initial placement covers {} of {episodes} episodes", p.len())))
            }
        }
    }
}

fn require_altitude(config: &ScenarioConfig, what: &str) -> Result<()> {
    if config.altitude() > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{what} planning needs a positive altitude")))
    }
}

fn solve_meta(trace: &ScaTrace) -> EpisodeSolve {
    EpisodeSolve {
        first_episode: trace.final_spec.first_episode,
        rounds: trace.rounds(),
        objective: trace.final_rate(),
        converged: trace.converged,
        newton_iterations: trace.solutions.iter().map(|s| s.newton_iterations).sum(),
    }
}

/// Joint optimization of all UAV positions over every episode.
pub fn plan_full_information(tracks: &EpisodeTracks, config: &ScenarioConfig, options: &PlanOptions) -> Result<PlanResult> {
    tracks.check_shape(config)?;
    require_altitude(config, "full-information")?;
    let init = initial_placement(tracks, config, options, tracks.num_episodes())?;
    let trace = run_sca(tracks, config, &ScaMode::Joint, &init, &options.sca)?;
    let uav_tracks = trace.final_placement().clone();
    let bound = min_average_lower_bound(&tracks.users, &uav_tracks, config)?;
    Ok(PlanResult {
        mode: PlanMode::FullInformation,
        uav_tracks,
        bound_min_rate: bound,
        mc_min_rate: None,
        mc_std_error: None,
        episodes: vec![solve_meta(&trace)],
        traces: vec![trace],
        iteration_mc: Vec::new(),
    })
}

/// Receding-horizon planning: each episode is optimized from its own user
/// positions only, within the displacement budget of the previous placement.
pub fn plan_current_information(
    tracks: &EpisodeTracks,
    config: &ScenarioConfig,
    options: &PlanOptions,
) -> Result<PlanResult> {
    tracks.check_shape(config)?;
    require_altitude(config, "current-information")?;
    let init = initial_placement(tracks, config, options, 1)?;
    let mut uav_tracks: Placement = Vec::with_capacity(tracks.num_episodes());
    let mut episodes = Vec::with_capacity(tracks.num_episodes());
    let mut traces = Vec::with_capacity(tracks.num_episodes());
    for n in 0..tracks.num_episodes() {
        let (anchor, start) = match uav_tracks.last() {
            None => (None, init[0].clone()),
            Some(prev) => (Some(prev.clone()), prev.clone()),
        };
        let mode = ScaMode::SingleEpisode { episode: n, anchor };
        let trace = run_sca(tracks, config, &mode, &vec![start], &options.sca)?;
        uav_tracks.push(trace.final_placement()[0].clone());
        episodes.push(solve_meta(&trace));
        traces.push(trace);
    }
    let bound = min_average_lower_bound(&tracks.users, &uav_tracks, config)?;
    Ok(PlanResult {
        mode: PlanMode::CurrentInformation,
        uav_tracks,
        bound_min_rate: bound,
        mc_min_rate: None,
        mc_std_error: None,
        traces,
        episodes,
        iteration_mc: Vec::new(),
    })
}

/// Offset applied to a ground-level UAV that starts exactly on a user.
const GROUND_JITTER: f64 = 1e-3;

/// One placement per UAV for the whole horizon. Works at zero altitude.
pub fn plan_static(tracks: &EpisodeTracks, config: &ScenarioConfig, options: &PlanOptions) -> Result<PlanResult> {
    tracks.check_shape(config)?;
    let mut init = initial_placement(tracks, config, options, 1)?;
    if config.altitude() == 0.0 {
        for p in init[0].iter_mut() {
            while tracks.users.iter().flatten().any(|u| u == p) {
                p.x += GROUND_JITTER;
            }
        }
    }
    let trace = run_sca(tracks, config, &ScaMode::Static, &init, &options.sca)?;
    let row = trace.final_placement()[0].clone();
    let uav_tracks = vec![row; tracks.num_episodes()];
    let bound = min_average_lower_bound(&tracks.users, &uav_tracks, config)?;
    Ok(PlanResult {
        mode: PlanMode::Static,
        uav_tracks,
        bound_min_rate: bound,
        mc_min_rate: None,
        mc_std_error: None,
        episodes: vec![solve_meta(&trace)],
        traces: vec![trace],
        iteration_mc: Vec::new(),
    })
}

pub fn plan(mode: PlanMode, tracks: &EpisodeTracks, config: &ScenarioConfig, options: &PlanOptions) -> Result<PlanResult> {
    match mode {
        PlanMode::FullInformation => plan_full_information(tracks, config, options),
        PlanMode::CurrentInformation => plan_current_information(tracks, config, options),
        PlanMode::Static => plan_static(tracks, config, options),
    }
}

fn mc_objective(tracks: &EpisodeTracks, placement: &Placement, config: &ScenarioConfig, mc: &McOptions) -> Result<(f64, f64)> {
    let t = EpisodeTracks {
        users: tracks.users.clone(),
        uavs: placement.clone(),
    };
    let report = average_min_rate(&t, config, RateKind::MonteCarlo, mc)?;
    Ok((report.min_rate, report.min_rate_std_error.unwrap_or(0.0)))
}

/// Estimates the true (ergodic) min-rate objective of a plan by Monte Carlo.
/// With `per_iteration`, every placement of the optimizer trace is evaluated
/// too.
pub fn evaluate_plan(
    plan: &PlanResult,
    tracks: &EpisodeTracks,
    config: &ScenarioConfig,
    mc: &McOptions,
    per_iteration: bool,
) -> Result<PlanResult> {
    let mut out = plan.clone();
    let (mean, se) = mc_objective(tracks, &plan.uav_tracks, config, mc)?;
    out.mc_min_rate = Some(mean);
    out.mc_std_error = Some(se);
    if per_iteration {
        if let ([trace], true) = (plan.traces.as_slice(), plan.mode != PlanMode::CurrentInformation) {
            out.iteration_mc = trace
                .placements
                .iter()
                .map(|p| {
                    let full = if p.len() == tracks.num_episodes() {
                        p.clone()
                    } else {
                        vec![p[0].clone(); tracks.num_episodes()]
                    };
                    mc_objective(tracks, &full, config, mc)
                })
                .collect::<Result<_>>()?;
        }
    }
    Ok(out)
}

/// Largest amount (m) by which any UAV overshoots its displacement budget
/// between consecutive episodes; `<= 0` means every budget is met.
pub fn max_budget_excess(tracks: &Placement, config: &ScenarioConfig) -> f64 {
    let budgets = displacement_budget(config);
    let mut worst = f64::NEG_INFINITY;
    for n in 1..tracks.len() {
        for m in 0..tracks[n].len() {
            worst = worst.max(tracks[n][m].dist(&tracks[n - 1][m]) - budgets.get(m, n - 1));
        }
    }
    worst
}
