mod common;

use common::*;
use skycomp::planners::{evaluate_plan, max_budget_excess, plan, InitStrategy, PlanMode, PlanOptions};
use skycomp::rates::{min_average_lower_bound, McOptions};
use skycomp::scenario::{EpisodeTracks, Point, RawConfig};

#[test]
fn one_episode_joint_equals_receding_horizon() {
    let (cfg, tracks) = scenario(RawConfig { n_episodes: 1, ..small_raw(31) });
    let a = plan(PlanMode::FullInformation, &tracks, &cfg, &PlanOptions::default()).unwrap();
    let b = plan(PlanMode::CurrentInformation, &tracks, &cfg, &PlanOptions::default()).unwrap();
    assert!((a.bound_min_rate - b.bound_min_rate).abs() < 1e-6);
    assert!(max_abs_diff(&a.uav_tracks, &b.uav_tracks) < 1e-3);
}

#[test]
fn zero_speed_joint_equals_static() {
    let (cfg, tracks) = scenario(RawConfig { uav_speed_max_mps: 0.0, ..small_raw(32) });
    let a = plan(PlanMode::FullInformation, &tracks, &cfg, &PlanOptions::default()).unwrap();
    let b = plan(PlanMode::Static, &tracks, &cfg, &PlanOptions::default()).unwrap();
    assert!((a.bound_min_rate - b.bound_min_rate).abs() <= 1e-4);
    for row in &a.uav_tracks {
        assert_eq!(row, &a.uav_tracks[0]);
    }
}

#[test]
fn zero_speed_receding_horizon_keeps_first_placement() {
    let (cfg, tracks) = scenario(RawConfig { uav_speed_max_mps: 0.0, ..small_raw(33) });
    let r = plan(PlanMode::CurrentInformation, &tracks, &cfg, &PlanOptions::default()).unwrap();
    for row in &r.uav_tracks {
        assert_eq!(row, &r.uav_tracks[0]);
    }
}

#[test]
fn every_mode_respects_budgets() {
    let (cfg, tracks) = scenario(small_raw(34));
    for mode in [PlanMode::FullInformation, PlanMode::CurrentInformation, PlanMode::Static] {
        let r = plan(mode, &tracks, &cfg, &PlanOptions::default()).unwrap();
        assert!(max_budget_excess(&r.uav_tracks, &cfg) <= 1e-6, "{mode:?}");
    }
}

#[test]
fn warm_started_plans_dominate_their_seeds() {
    let (cfg, tracks) = scenario(small_raw(35));
    let st = plan(PlanMode::Static, &tracks, &cfg, &PlanOptions::default()).unwrap();
    let full = plan(PlanMode::FullInformation, &tracks, &cfg, &PlanOptions::warm(st.uav_tracks.clone())).unwrap();
    assert!(st.bound_min_rate <= full.bound_min_rate + 1e-6);
    let cur = plan(PlanMode::CurrentInformation, &tracks, &cfg, &PlanOptions::default()).unwrap();
    let full = plan(PlanMode::FullInformation, &tracks, &cfg, &PlanOptions::warm(cur.uav_tracks.clone())).unwrap();
    assert!(cur.bound_min_rate <= full.bound_min_rate + 1e-6);
}

#[test]
fn group_assignment_does_not_change_rates() {
    let (cfg, tracks) = scenario(small_raw(36));
    let order = [4, 0, 5, 2, 1, 3];
    let permuted = EpisodeTracks::from_users(
        tracks.users.iter().map(|row| order.iter().map(|&i| row[i]).collect()).collect(),
    );
    for mode in [PlanMode::Static, PlanMode::FullInformation] {
        let a = plan(mode, &tracks, &cfg, &PlanOptions::default()).unwrap();
        let b = plan(mode, &permuted, &cfg, &PlanOptions::default()).unwrap();
        assert!((a.bound_min_rate - b.bound_min_rate).abs() <= 1e-6, "{mode:?}");
    }
}

#[test]
fn fixed_single_user_gets_overhead_uavs() {
    let raw = RawConfig { m: 2, k: 1, l: 1, n_episodes: 3, user_speed_mps: 0.0, ..small_raw(37) };
    let (cfg, tracks) = scenario(raw);
    let r = plan(PlanMode::Static, &tracks, &cfg, &PlanOptions::default()).unwrap();
    for p in &r.uav_tracks[0] {
        assert!(p.dist(&tracks.users[0][0]) < 1e-2, "{p:?}");
    }
}

#[test]
fn ground_level_static_plan() {
    let (cfg, tracks) = scenario(RawConfig { altitude_m: 0.0, ..small_raw(38) });
    let r = plan(PlanMode::Static, &tracks, &cfg, &PlanOptions::default()).unwrap();
    assert!(r.bound_min_rate.is_finite() && r.bound_min_rate > 0.0);
    let init = plan(PlanMode::Static, &tracks, &cfg, &PlanOptions { sca: skycomp::ScaSettings { max_outer: 1, ..Default::default() }, ..PlanOptions::default() });
    assert!(init.is_ok());
    assert!(plan(PlanMode::FullInformation, &tracks, &cfg, &PlanOptions::default()).is_err());
}

#[test]
fn static_users_make_receding_horizon_catch_up() {
    let raw = RawConfig { user_speed_mps: 0.0, uav_speed_max_mps: 500.0, n_episodes: 4, ..small_raw(39) };
    let (cfg, tracks) = scenario(raw);
    let cur = plan(PlanMode::CurrentInformation, &tracks, &cfg, &PlanOptions::default()).unwrap();
    let full = plan(PlanMode::FullInformation, &tracks, &cfg, &PlanOptions::default()).unwrap();
    let last = tracks.num_episodes() - 1;
    let rate = |p: &Vec<Point>| min_average_lower_bound(&tracks.users[last..], &[p.clone()], &cfg).unwrap();
    assert!((rate(&cur.uav_tracks[last]) - rate(&full.uav_tracks[last])).abs() <= 1e-2);
}

/// Best placement of two UAVs for three users: exhaustive 10 m grid, then a
/// 1 m grid around the best pair.
fn brute_force(users: &[Point], cfg: &skycomp::ScenarioConfig) -> (f64, Vec<Point>) {
    let rows = vec![users.to_vec()];
    let eval = |a: Point, b: Point| min_average_lower_bound(&rows, &[vec![a, b]], cfg).unwrap();
    let grid: Vec<Point> = (0..=50)
        .flat_map(|i| (0..=50).map(move |j| Point::new(i as f64 * 10.0, j as f64 * 10.0)))
        .collect();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for (i, a) in grid.iter().enumerate() {
        for b in &grid[i..] {
            let v = eval(*a, *b);
            if v > best.0 {
                best = (v, vec![*a, *b]);
            }
        }
    }
    let (a0, b0) = (best.1[0], best.1[1]);
    let near = |c: Point| -> Vec<Point> {
        (-10..=10)
            .flat_map(|i| (-10..=10).map(move |j| Point::new(c.x + i as f64, c.y + j as f64)))
            .collect()
    };
    for a in near(a0) {
        for b in near(b0) {
            let v = eval(a, b);
            if v > best.0 {
                best = (v, vec![a, b]);
            }
        }
    }
    best
}

#[test]
fn isolated_user_gets_a_dedicated_uav() {
    let raw = RawConfig { m: 2, k: 1, l: 3, n_episodes: 1, ..small_raw(40) };
    let cfg = config(raw);
    let users = vec![Point::new(60.0, 60.0), Point::new(64.0, 60.0), Point::new(450.0, 440.0)];
    let tracks = EpisodeTracks::from_users(vec![users.clone()]);
    let r = plan(PlanMode::Static, &tracks, &cfg, &PlanOptions::warm(vec![vec![Point::new(150.0, 150.0), Point::new(350.0, 350.0)]])).unwrap();
    let nearest = |pts: &[Point]| pts.iter().map(|p| p.dist(&users[2])).fold(f64::INFINITY, f64::min);
    let (best, placement) = brute_force(&users, &cfg);
    assert!(nearest(&placement) <= 10.0, "{placement:?}");
    assert!(nearest(&r.uav_tracks[0]) <= 10.0, "{:?}", r.uav_tracks[0]);
    assert!(r.bound_min_rate >= best - 1e-6, "{} vs {best}", r.bound_min_rate);
}

#[test]
fn evaluation_is_deterministic_and_conservative() {
    let (cfg, tracks) = scenario(small_raw(41));
    let r = plan(PlanMode::Static, &tracks, &cfg, &PlanOptions { init: InitStrategy::Random, ..PlanOptions::default() }).unwrap();
    let mc = McOptions { trials: 500, ..McOptions::default() };
    let a = evaluate_plan(&r, &tracks, &cfg, &mc, true).unwrap();
    let b = evaluate_plan(&r, &tracks, &cfg, &mc, true).unwrap();
    assert_eq!(a.mc_min_rate, b.mc_min_rate);
    assert_eq!(a.iteration_mc, b.iteration_mc);
    assert_eq!(a.iteration_mc.len(), r.traces[0].objective.len());
    let se = a.mc_std_error.unwrap();
    assert!(a.bound_min_rate <= a.mc_min_rate.unwrap() + 3.0 * se + 0.05);

    let double = evaluate_plan(&r, &tracks, &cfg, &McOptions { trials: 1000, ..mc }, false).unwrap();
    let ratio = double.mc_std_error.unwrap() / se;
    assert!((ratio / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() <= 0.2, "{ratio}");
}
