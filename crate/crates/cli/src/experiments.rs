//! The six experiments. Each returns its table; [`run`] also writes it.

use std::path::PathBuf;

use rayon::prelude::*;
use skycomp::channel::ChannelModel;
use skycomp::planners::{plan, InitStrategy, PlanMode, PlanOptions, PlanResult};
use skycomp::rates::stats::{projected_power_mean, wishart_inverse_trace};
use skycomp::rates::{
    average_min_rate, group_distances, monte_carlo_ergodic_rate, rate_lower_bound, rate_upper_bound,
    user_distances, McOptions, RateKind, RateParams,
};
use skycomp::rng::{substream, StreamTag};
use skycomp::scenario::{generate_user_tracks, EpisodeTracks, Placement, Point, ScenarioConfig};

use crate::error::CliResult;
use crate::output::{format_number as num, Table};
use crate::spec::{ExperimentKind, ExperimentSpec, InitKind};

/// Rows of one sweep point.
type Segment = Vec<Vec<String>>;

fn table(spec: &ExperimentSpec, header: &[&str]) -> Table {
    Table::new(spec.kind.name(), &spec.effective_raw(), spec.seed, header)
}

fn mc_options(spec: &ExperimentSpec) -> McOptions {
    McOptions {
        trials: spec.trials,
        seed: spec.seed,
        model: ChannelModel::LosRandomPhase,
    }
}

fn plan_options(spec: &ExperimentSpec, init: InitStrategy, tag: &str) -> PlanOptions {
    let mut options = PlanOptions {
        init,
        seed: Some(spec.seed),
        ..PlanOptions::default()
    };
    if spec.dump_subproblems {
        options.sca.dump_dir = Some(spec.out_dir.join("subproblems").join(spec.kind.name()).join(tag));
    }
    options
}

fn default_init(spec: &ExperimentSpec) -> InitStrategy {
    match spec.init {
        InitKind::Centroid => PlanOptions::default().init,
        InitKind::Random => InitStrategy::Random,
    }
}

/// Monte-Carlo min rate and its standard error for a placement covering every
/// episode (a single row is repeated).
fn mc_min_rate(tracks: &EpisodeTracks, placement: &Placement, config: &ScenarioConfig, mc: &McOptions) -> CliResult<(f64, f64)> {
    let uavs = if placement.len() == tracks.num_episodes() {
        placement.clone()
    } else {
        vec![placement[0].clone(); tracks.num_episodes()]
    };
    let t = EpisodeTracks {
        users: tracks.users.clone(),
        uavs,
    };
    let report = average_min_rate(&t, config, RateKind::MonteCarlo, mc)?;
    Ok((report.min_rate, report.min_rate_std_error.unwrap_or(0.0)))
}

/// UAV positions of a single random drop.
pub fn drop_uavs(config: &ScenarioConfig) -> Vec<Point> {
    let arena = config.arena();
    let mut rng = substream(config.seed(), StreamTag::UavPlacement, &[0]);
    (0..config.num_uavs()).map(|_| arena.sample(&mut rng)).collect()
}

/// Closed-form bounds and Monte-Carlo rates of every user for one random
/// drop (first episode of the scenario).
pub fn run_bounds_tightness(spec: &ExperimentSpec) -> CliResult<Table> {
    spec.validate()?;
    let config = spec.scenario()?;
    let tracks = generate_user_tracks(&config)?;
    let users = &tracks.users[0];
    let uavs = drop_uavs(&config);
    let params = RateParams::from_config(&config);
    let (h, k) = (config.altitude(), config.users_per_group());
    let mut t = table(
        spec,
        &["user_id", "lower", "upper", "mc_los", "mc_rayleigh", "se", "se_rayleigh"],
    );
    let groups: Vec<Segment> = (0..config.num_groups())
        .into_par_iter()
        .map(|l| -> CliResult<Segment> {
            let d = group_distances(&uavs, users, l, k, h);
            let key = [0, l as u64];
            let los = monte_carlo_ergodic_rate(&d, &params, ChannelModel::LosRandomPhase, spec.trials, spec.seed, &key)?;
            let ray = monte_carlo_ergodic_rate(&d, &params, ChannelModel::RayleighPerLink, spec.trials, spec.seed, &key)?;
            (0..k)
                .map(|i| {
                    let u = l * k + i;
                    let du = user_distances(&uavs, users[u], h);
                    Ok(vec![
                        u.to_string(),
                        num(rate_lower_bound(&du, &params)?),
                        num(rate_upper_bound(&du, &params)?),
                        num(los.mean[i]),
                        num(ray.mean[i]),
                        num(los.std_error[i]),
                        num(ray.std_error[i]),
                    ])
                })
                .collect()
        })
        .collect::<CliResult<_>>()?;
    t.rows = groups.into_iter().flatten().collect();
    Ok(t)
}

/// Objective after every optimizer round, with the Monte-Carlo estimate of
/// each iterate. Row 0 is the initial placement.
pub fn run_convergence(spec: &ExperimentSpec) -> CliResult<Table> {
    spec.validate()?;
    let config = spec.scenario()?;
    let tracks = generate_user_tracks(&config)?;
    let mode = spec.modes[0];
    let result = plan(mode, &tracks, &config, &plan_options(spec, default_init(spec), mode.label()))?;
    let trace = &result.traces[0];
    let mc = mc_options(spec);
    let estimates: Vec<(f64, f64)> = trace
        .placements
        .par_iter()
        .map(|p| mc_min_rate(&tracks, p, &config, &mc))
        .collect::<CliResult<_>>()?;
    let mut t = table(spec, &["iteration", "R_bound", "R_mc", "se"]);
    for (q, (bound, (mean, se))) in trace.objective.iter().zip(estimates).enumerate() {
        t.push(vec![q.to_string(), num(*bound), num(mean), num(se)]);
    }
    Ok(t)
}

fn point_row(mode: PlanMode, v: f64, result: &PlanResult) -> Vec<String> {
    vec![
        mode.label().to_string(),
        num(v),
        num(result.bound_min_rate),
        num(result.mc_min_rate.unwrap_or(f64::NAN)),
        num(result.mc_std_error.unwrap_or(f64::NAN)),
    ]
}

fn with_mc(mut result: PlanResult, tracks: &EpisodeTracks, config: &ScenarioConfig, mc: &McOptions) -> CliResult<PlanResult> {
    let (mean, se) = mc_min_rate(tracks, &result.uav_tracks, config, mc)?;
    result.mc_min_rate = Some(mean);
    result.mc_std_error = Some(se);
    Ok(result)
}

/// Min rate of every planner over the UAV speed limits. The static plan seeds
/// every dynamic plan; full-information plans are chained in increasing
/// speed, each warm-started from the previous one.
pub fn run_speed_sweep(spec: &ExperimentSpec) -> CliResult<Table> {
    spec.validate()?;
    let config = spec.scenario()?;
    let tracks = generate_user_tracks(&config)?;
    let mc = mc_options(spec);
    let mut speeds = spec.speeds.clone();
    speeds.sort_by(f64::total_cmp);
    speeds.dedup();
    let at_speed = |v: f64| config.modified(|r| r.uav_speed_max_mps = v);

    let static_plan = plan(PlanMode::Static, &tracks, &config, &plan_options(spec, default_init(spec), "static"))?;
    let seed_row = vec![static_plan.uav_tracks[0].clone()];
    let wants = |m: PlanMode| spec.modes.contains(&m);

    let full_chain = || -> CliResult<Vec<PlanResult>> {
        if !wants(PlanMode::FullInformation) {
            return Ok(Vec::new());
        }
        let mut warm = static_plan.uav_tracks.clone();
        let mut out = Vec::with_capacity(speeds.len());
        for v in &speeds {
            let cfg = at_speed(*v)?;
            let tag = format!("full_v{v}");
            let r = plan(PlanMode::FullInformation, &tracks, &cfg, &plan_options(spec, InitStrategy::Given(warm), &tag))?;
            warm = r.uav_tracks.clone();
            out.push(r);
        }
        Ok(out)
    };
    let current = || -> CliResult<Vec<PlanResult>> {
        if !wants(PlanMode::CurrentInformation) {
            return Ok(Vec::new());
        }
        speeds
            .par_iter()
            .map(|v| {
                let cfg = at_speed(*v)?;
                let tag = format!("current_v{v}");
                let opts = plan_options(spec, InitStrategy::Given(seed_row.clone()), &tag);
                Ok(plan(PlanMode::CurrentInformation, &tracks, &cfg, &opts)?)
            })
            .collect()
    };
    let (full, current) = rayon::join(full_chain, current);
    let (full, current) = (full?, current?);

    let mut points: Vec<(PlanMode, f64, PlanResult)> = Vec::new();
    points.extend(speeds.iter().zip(full).map(|(v, r)| (PlanMode::FullInformation, *v, r)));
    points.extend(speeds.iter().zip(current).map(|(v, r)| (PlanMode::CurrentInformation, *v, r)));
    if wants(PlanMode::Static) {
        points.extend(speeds.iter().map(|v| (PlanMode::Static, *v, static_plan.clone())));
    }
    let static_mc = if wants(PlanMode::Static) {
        Some(mc_min_rate(&tracks, &static_plan.uav_tracks, &config, &mc)?)
    } else {
        None
    };
    let segments: Vec<Segment> = points
        .into_par_iter()
        .map(|(mode, v, r)| {
            let r = match (mode, static_mc) {
                (PlanMode::Static, Some((mean, se))) => PlanResult {
                    mc_min_rate: Some(mean),
                    mc_std_error: Some(se),
                    ..r
                },
                _ => with_mc(r, &tracks, &at_speed(v)?, &mc)?,
            };
            Ok(vec![point_row(mode, v, &r)])
        })
        .collect::<CliResult<_>>()?;
    let mut t = table(spec, &["mode", "v_uav", "min_rate_bound", "min_rate_mc", "se"]);
    t.rows = segments.into_iter().flatten().collect();
    Ok(t)
}

fn grouping_segments(spec: &ExperimentSpec) -> CliResult<Vec<Segment>> {
    let base = spec.effective_raw();
    let total = base.k * base.l;
    let mc = mc_options(spec);
    let base_cfg = ScenarioConfig::new(base.clone())?;
    let tracks = generate_user_tracks(&base_cfg)?;
    spec.groups
        .par_iter()
        .map(|&l| -> CliResult<Segment> {
            let k = total / l;
            if k >= base.m {
                return Ok(spec
                    .modes
                    .iter()
                    .map(|mode| {
                        let mut row = vec![l.to_string(), k.to_string(), mode.label().to_string()];
                        row.extend(std::iter::repeat_n(String::new(), 4));
                        row.push("skipped".into());
                        row
                    })
                    .collect());
            }
            let cfg = base_cfg.modified(|r| {
                r.l = l;
                r.k = k;
            })?;
            let prelog = RateParams::from_config(&cfg).prelog();
            spec.modes
                .iter()
                .map(|&mode| {
                    let tag = format!("{}_L{l}", mode.label());
                    let r = plan(mode, &tracks, &cfg, &plan_options(spec, default_init(spec), &tag))?;
                    let (mean, se) = mc_min_rate(&tracks, &r.uav_tracks, &cfg, &mc)?;
                    Ok(vec![
                        l.to_string(),
                        k.to_string(),
                        mode.label().to_string(),
                        num(prelog),
                        num(r.bound_min_rate),
                        num(mean),
                        num(se),
                        "ok".into(),
                    ])
                })
                .collect()
        })
        .collect()
}

/// Min rate for every group count `L` dividing the user population. Group
/// counts leaving `K >= M` users per group are reported as skipped.
pub fn run_grouping_sweep(spec: &ExperimentSpec) -> CliResult<Table> {
    spec.validate()?;
    let mut t = table(spec, &["L", "K", "mode", "prelog", "min_rate", "min_rate_mc", "se", "status"]);
    t.rows = grouping_segments(spec)?.into_iter().flatten().collect();
    Ok(t)
}

/// Simulated versus theoretical values of the random-matrix statistics behind
/// the lower bound, on one random drop.
pub fn run_appendix_stats(spec: &ExperimentSpec) -> CliResult<Table> {
    spec.validate()?;
    let config = spec.scenario()?;
    let tracks = generate_user_tracks(&config)?;
    let uavs = drop_uavs(&config);
    let k = config.users_per_group();
    let d = group_distances(&uavs, &tracks.users[0], 0, k, config.altitude());
    let mut estimates = vec![wishart_inverse_trace(config.num_uavs(), k, spec.trials, spec.seed)?];
    let projected: Vec<_> = (0..k)
        .into_par_iter()
        .map(|u| {
            let mut e = projected_power_mean(&d, config.ref_gain(), u, spec.trials, spec.seed)?;
            e.name = format!("{}_user{u}", e.name);
            Ok(e)
        })
        .collect::<CliResult<_>>()?;
    estimates.extend(projected);
    let mut t = table(spec, &["statistic", "theoretical", "empirical", "rel_error", "std_error", "trials"]);
    for e in estimates {
        t.push(vec![
            e.name.clone(),
            num(e.theoretical),
            num(e.empirical),
            num(e.rel_error()),
            num(e.std_error),
            e.trials.to_string(),
        ]);
    }
    Ok(t)
}

/// User and UAV positions of every planner at every `stride`-th episode.
pub fn run_trajectory_snapshot(spec: &ExperimentSpec) -> CliResult<Table> {
    spec.validate()?;
    let config = spec.scenario()?;
    let tracks = generate_user_tracks(&config)?;
    let segments: Vec<Segment> = spec
        .modes
        .par_iter()
        .map(|&mode| -> CliResult<Segment> {
            let r = plan(mode, &tracks, &config, &plan_options(spec, default_init(spec), mode.label()))?;
            let mut rows = Vec::new();
            for n in (0..tracks.num_episodes()).step_by(spec.stride) {
                let entities = tracks.users[n]
                    .iter()
                    .map(|p| ("user", p))
                    .enumerate()
                    .chain(r.uav_tracks[n].iter().map(|p| ("uav", p)).enumerate());
                for (i, (kind, p)) in entities {
                    rows.push(vec![
                        mode.label().to_string(),
                        n.to_string(),
                        kind.to_string(),
                        i.to_string(),
                        num(p.x),
                        num(p.y),
                    ]);
                }
            }
            Ok(rows)
        })
        .collect::<CliResult<_>>()?;
    let mut t = table(spec, &["mode", "episode", "kind", "index", "x", "y"]);
    t.rows = segments.into_iter().flatten().collect();
    Ok(t)
}

pub fn run_table(spec: &ExperimentSpec) -> CliResult<Table> {
    match spec.kind {
        ExperimentKind::BoundsTightness => run_bounds_tightness(spec),
        ExperimentKind::Convergence => run_convergence(spec),
        ExperimentKind::SpeedSweep => run_speed_sweep(spec),
        ExperimentKind::GroupingSweep => run_grouping_sweep(spec),
        ExperimentKind::AppendixStats => run_appendix_stats(spec),
        ExperimentKind::TrajectorySnapshot => run_trajectory_snapshot(spec),
    }
}

/// Runs the experiment and writes its CSV into the output directory. Sweeps
/// write one part file per sweep point before merging.
pub fn run(spec: &ExperimentSpec) -> CliResult<PathBuf> {
    let path = spec.output_path();
    match spec.kind {
        ExperimentKind::GroupingSweep => {
            spec.validate()?;
            let t = table(spec, &["L", "K", "mode", "prelog", "min_rate", "min_rate_mc", "se", "status"]);
            t.write_segments(&path, &grouping_segments(spec)?)?;
        }
        ExperimentKind::SpeedSweep => {
            let t = run_speed_sweep(spec)?;
            let segments: Vec<Segment> = t.rows.iter().map(|r| vec![r.clone()]).collect();
            t.write_segments(&path, &segments)?;
        }
        _ => run_table(spec)?.write(&path)?,
    }
    Ok(path)
}
