//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to
//! stderr (bypassing output capture) before asserting.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use skycomp::planners::{plan, InitStrategy, PlanMode, PlanOptions, PlanResult};
use skycomp::rates::{bound_gap_limit, rate_lower_bound, rate_upper_bound, user_distances, RateParams};
use skycomp::scenario::{generate_user_tracks, RawConfig, ScenarioConfig};
use skycomp::sca::{tightness, verify_weighted_average};
use skycomp_cli::experiments::drop_uavs;
use skycomp_cli::spec::{drop_preset, trajectory_preset, ALL_MODES};
use skycomp_cli::{run, run_table, ExperimentKind, ExperimentSpec, Table};

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr();
    let _ = writeln!(err, "[{tag}] criterion {id:>2} {name}: {detail}");
}

fn info(id: u32, detail: &str) {
    let _ = writeln!(std::io::stderr(), "[INFO] criterion {id:>2} {detail}");
}

fn column(t: &Table, name: &str) -> Vec<f64> {
    let i = t.column(name).unwrap_or_else(|| panic!("no column {name}"));
    t.rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect()
}

fn spec(kind: ExperimentKind) -> ExperimentSpec {
    ExperimentSpec::new(kind, std::env::temp_dir().join("skycomp-acceptance"))
}

#[test]
fn bound_sandwich() {
    let start = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    let mut rows = 0;
    for seed in 1..=10 {
        let s = ExperimentSpec { seed, trials: 5000, ..spec(ExperimentKind::BoundsTightness) };
        let t = run_table(&s).unwrap();
        let (lo, hi) = (column(&t, "lower"), column(&t, "upper"));
        let (mc, se) = (column(&t, "mc_los"), column(&t, "se"));
        for i in 0..t.rows.len() {
            let slack = 3.0 * se[i] + 0.05;
            worst = worst.max(lo[i] - slack - mc[i]).max(mc[i] - hi[i] - slack);
        }
        rows += t.rows.len();
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 0.0 && rows == 60 && secs < 60.0;
    report(1, "bound sandwich", pass, &format!("{rows} users over 10 drops, worst excess {worst:.4}, {secs:.1} s"));
    assert!(pass);
}

#[test]
fn analytical_gap_bound() {
    let limit = 1.25f64.log2();
    let mut worst = 0.0f64;
    for seed in 1..=1000 {
        let cfg = ScenarioConfig::new(RawConfig { seed, ..drop_preset() }).unwrap();
        let params = RateParams::from_config(&cfg);
        assert!((bound_gap_limit(&params) - limit).abs() < 1e-15);
        let users = generate_user_tracks(&cfg).unwrap().users.remove(0);
        let uavs = drop_uavs(&cfg);
        for u in &users {
            let d = user_distances(&uavs, *u, cfg.altitude());
            worst = worst.max(rate_upper_bound(&d, &params).unwrap() - rate_lower_bound(&d, &params).unwrap());
        }
    }
    let pass = worst <= limit;
    report(2, "analytical gap", pass, &format!("max gap {worst:.6} vs log2(1.25) = {limit:.6} over 1000 drops"));
    assert!(pass);
}

fn appendix_rows() -> (Table, f64) {
    let start = Instant::now();
    let t = run_table(&ExperimentSpec { trials: 10_000, ..spec(ExperimentKind::AppendixStats) }).unwrap();
    (t, start.elapsed().as_secs_f64())
}

#[test]
fn wishart_trace() {
    let (t, secs) = appendix_rows();
    let i = t.column("statistic").unwrap();
    let row = t.rows.iter().position(|r| r[i] == "wishart_inverse_trace").unwrap();
    let (theory, err) = (column(&t, "theoretical")[row], column(&t, "rel_error")[row]);
    let pass = theory == 1.5 && err <= 0.02 && secs < 10.0;
    report(3, "wishart trace", pass, &format!("target {theory}, rel error {err:.4} over 1e4 draws, {secs:.1} s"));
    assert!(pass);
}

#[test]
fn projected_power_mean() {
    let (t, secs) = appendix_rows();
    let i = t.column("statistic").unwrap();
    let errs: Vec<f64> = column(&t, "rel_error")
        .into_iter()
        .zip(&t.rows)
        .filter(|(_, r)| r[i].starts_with("projected_power_mean"))
        .map(|(e, _)| e)
        .collect();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    let pass = errs.len() == 6 && worst <= 0.02 && secs < 10.0;
    report(4, "projected power", pass, &format!("worst rel error {worst:.4} over {} users, {secs:.1} s", errs.len()));
    assert!(pass);
}

struct RunStats {
    monotone_violation: f64,
    kkt: f64,
    tightness: f64,
    unconverged: usize,
}

fn run_stats(results: &[(PlanResult, Vec<Vec<skycomp::Point>>)]) -> RunStats {
    let mut s = RunStats { monotone_violation: 0.0, kkt: 0.0, tightness: 0.0, unconverged: 0 };
    for (r, users) in results {
        for trace in &r.traces {
            for w in trace.objective.windows(2) {
                s.monotone_violation = s.monotone_violation.max(w[0] - w[1]);
            }
            for sol in &trace.solutions {
                s.kkt = s.kkt.max(sol.kkt.max_asserted());
            }
            if !trace.converged {
                s.unconverged += 1;
            }
            let spec = &trace.final_spec;
            let window = &users[spec.first_episode..spec.first_episode + spec.num_episodes()];
            let last = trace.final_solution().unwrap();
            s.tightness = s.tightness.max(tightness(window, &last.positions, &last.c, spec.altitude));
        }
    }
    s
}

/// Twenty random desk-scale instances, every planner, random initial
/// placements.
fn desk_instances() -> Vec<(PlanResult, Vec<Vec<skycomp::Point>>)> {
    (1..=20u64)
        .into_par_iter()
        .flat_map_iter(|seed| {
            let raw = RawConfig { m: 5, k: 3, l: 2, n_episodes: 5, seed, ..trajectory_preset() };
            let cfg = ScenarioConfig::new(raw).unwrap();
            let tracks = generate_user_tracks(&cfg).unwrap();
            let opts = PlanOptions { init: InitStrategy::Random, ..PlanOptions::default() };
            ALL_MODES
                .iter()
                .map(|m| (plan(*m, &tracks, &cfg, &opts).unwrap(), tracks.users.clone()))
                .collect::<Vec<_>>()
        })
        .collect()
}

#[test]
fn sca_monotonicity_and_tightness() {
    let start = Instant::now();
    let results = desk_instances();
    let s = run_stats(&results);
    let secs = start.elapsed().as_secs_f64();
    let mono = s.monotone_violation <= 1e-9 && s.kkt <= 1e-6 && secs < 600.0;
    report(
        5,
        "SCA monotonicity",
        mono,
        &format!(
            "{} runs, max decrease {:.2e}, max KKT residual {:.2e}, {secs:.1} s",
            results.len(),
            s.monotone_violation.max(0.0),
            s.kkt
        ),
    );
    let tight = s.tightness <= 1e-4 && s.unconverged == 0;
    report(
        6,
        "reformulation tightness",
        tight,
        &format!("max |c d^2 - 1| = {:.2e}, {} unconverged traces", s.tightness, s.unconverged),
    );
    assert!(mono && tight);
}

#[test]
fn weighted_average_stationarity() {
    let cfg = ScenarioConfig::new(trajectory_preset()).unwrap();
    let tracks = generate_user_tracks(&cfg).unwrap();
    let tol = 1e-3 * cfg.arena().diagonal();
    let lines: Vec<(PlanMode, f64, usize)> = ALL_MODES
        .par_iter()
        .map(|&mode| {
            let r = plan(mode, &tracks, &cfg, &PlanOptions::default()).unwrap();
            let mut worst = 0.0f64;
            let mut indeterminate = 0;
            for trace in &r.traces {
                let rep = verify_weighted_average(trace.final_solution().unwrap(), &trace.final_spec);
                worst = worst.max(rep.max_residual);
                indeterminate += rep.indeterminate;
            }
            (mode, worst, indeterminate)
        })
        .collect();
    let pass = lines.iter().all(|l| l.1 <= tol);
    let detail: Vec<String> = lines
        .iter()
        .map(|(m, w, i)| format!("{} {w:.2e} m ({i} indeterminate)", m.label()))
        .collect();
    report(7, "weighted-average stationarity", pass, &format!("{} vs tol {tol:.3} m", detail.join(", ")));
    assert!(pass);
}

fn convergence_ratio(config: RawConfig) -> (f64, f64, f64, usize) {
    let t = run_table(&ExperimentSpec { config, ..spec(ExperimentKind::Convergence) }).unwrap();
    let b = column(&t, "R_bound");
    let (first, last) = (b[0], *b.last().unwrap());
    (first, last, last / first, b.len() - 1)
}

#[test]
fn improvement_over_random_placement() {
    let (first, last, ratio, rounds) = convergence_ratio(trajectory_preset());
    let pass = ratio >= 1.3;
    report(8, "improvement over random placement", pass, &format!("{first:.4} -> {last:.4} (x{ratio:.3}) in {rounds} rounds"));
    let high = RawConfig { ref_gain_db: -40.0, ..trajectory_preset() };
    let (f, l, r, _) = convergence_ratio(high);
    info(8, &format!("at a -40 dB reference gain: {f:.4} -> {l:.4} (x{r:.3})"));
    assert!(pass);
}

#[test]
fn mode_dominance() {
    let t = run_table(&spec(ExperimentKind::SpeedSweep)).unwrap();
    let m = t.column("mode").unwrap();
    let (v, rate) = (column(&t, "v_uav"), column(&t, "min_rate_bound"));
    let pick = |mode: &str| -> Vec<(f64, f64)> {
        t.rows.iter().enumerate().filter(|(_, r)| r[m] == mode).map(|(i, _)| (v[i], rate[i])).collect()
    };
    let (full, current, stat) = (pick("full"), pick("current"), pick("static"));
    let st = stat[0].1;
    let full20 = full.iter().find(|p| p.0 == 20.0).unwrap().1;
    let nondecreasing = full.windows(2).all(|w| w[1].1 >= w[0].1);
    let gap = full20 - st;
    let at = |c: &[(f64, f64)], s: f64| c.iter().find(|p| p.0 == s).unwrap().1;
    let pass = st <= full20 && nondecreasing && gap <= 0.5;
    let curve: Vec<String> = full.iter().map(|p| format!("{:.5}", p.1)).collect();
    report(
        9,
        "mode dominance",
        pass,
        &format!(
            "static {st:.5}, full [{}], gap {gap:.5}; full(0) - static {:.1e}; current(5) {:.5}, current(20) {:.5}",
            curve.join(", "),
            at(&full, 0.0) - st,
            at(&current, 5.0),
            at(&current, 20.0)
        ),
    );
    assert!(pass);
}

fn grouping(config: RawConfig) -> Vec<(usize, f64)> {
    let t = run_table(&ExperimentSpec { config, ..spec(ExperimentKind::GroupingSweep) }).unwrap();
    let l = t.column("L").unwrap();
    let rate = column(&t, "min_rate");
    t.rows.iter().zip(rate).map(|(r, v)| (r[l].parse().unwrap(), v)).collect()
}

fn argmax(points: &[(usize, f64)]) -> usize {
    points.iter().fold(points[0], |b, p| if p.1 > b.1 { *p } else { b }).0
}

#[test]
fn grouping_trade_off() {
    let default = ExperimentKind::GroupingSweep.default_config();
    let points = grouping(default.clone());
    let best = argmax(&points);
    let pass = best != 2 && best != 9 && points.len() == 4;
    let list: Vec<String> = points.iter().map(|(l, v)| format!("L={l}: {v:.4}")).collect();
    report(10, "grouping trade-off", pass, &format!("{}; maximum at L={best}", list.join(", ")));
    let high = grouping(RawConfig { ref_gain_db: -40.0, ..default });
    info(10, &format!("at a -40 dB reference gain the maximum is at L={}", argmax(&high)));
    assert!(pass);
}

#[test]
fn deterministic_output() {
    let base = std::env::temp_dir().join(format!("skycomp-determinism-{}", std::process::id()));
    let small = |kind: ExperimentKind, dir: &str| {
        let mut s = ExperimentSpec::new(kind, base.join(dir));
        if !matches!(kind, ExperimentKind::BoundsTightness | ExperimentKind::AppendixStats) {
            s.config.n_episodes = 3;
        }
        s.trials = s.trials.min(1000);
        s
    };
    let mut differing = Vec::new();
    for kind in ExperimentKind::ALL {
        let a = run(&small(kind, "a")).unwrap();
        let b = run(&small(kind, "b")).unwrap();
        if std::fs::read(&a).unwrap() != std::fs::read(&b).unwrap() {
            differing.push(kind.name());
        }
    }
    let _ = std::fs::remove_dir_all(&base);
    let pass = differing.is_empty();
    report(11, "determinism", pass, &format!("6 experiments run twice, differing: {differing:?}"));
    assert!(pass);
}
