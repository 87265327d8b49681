#![allow(dead_code)]

use skycomp::scenario::{generate_user_tracks, EpisodeTracks, Point, RawConfig, ScenarioConfig};
use skycomp::sca::{SlotRef, SubproblemKind, SubproblemSpec};

/// Five UAVs, two groups of three users, five episodes.
pub fn small_raw(seed: u64) -> RawConfig {
    RawConfig {
        m: 5,
        k: 3,
        l: 2,
        n_episodes: 5,
        seed,
        ..RawConfig::default()
    }
}

pub fn config(raw: RawConfig) -> ScenarioConfig {
    ScenarioConfig::new(raw).unwrap()
}

pub fn scenario(raw: RawConfig) -> (ScenarioConfig, EpisodeTracks) {
    let cfg = config(raw);
    let tracks = generate_user_tracks(&cfg).unwrap();
    (cfg, tracks)
}

/// Ten UAVs and six users dropped in a 100 m square.
pub fn drop_raw(seed: u64) -> RawConfig {
    RawConfig {
        k: 6,
        l: 1,
        n_episodes: 1,
        arena_m: [0.0, 100.0, 0.0, 100.0],
        seed,
        ..RawConfig::default()
    }
}

/// Single-episode surrogate with free UAVs linearized at `c_tilde`.
pub fn free_spec(users: Vec<Point>, start: Vec<Point>, c_tilde: f64, altitude: f64, gain: f64, prefactor: f64) -> SubproblemSpec {
    let m = start.len();
    SubproblemSpec {
        kind: SubproblemKind::SingleEpisode,
        first_episode: 0,
        num_uavs: m,
        altitude,
        rate_gain: gain,
        prefactor,
        lin_points: vec![vec![vec![c_tilde; m]; users.len()]],
        users: vec![users],
        slots: vec![(0..m).map(SlotRef::Var).collect()],
        num_slots: m,
        links: Vec::new(),
        start,
        incumbent: None,
        c_min: 1e-12,
    }
}

pub fn max_abs_diff(a: &[Vec<Point>], b: &[Vec<Point>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(p, q)| p.dist(q))
        .fold(0.0, f64::max)
}
