//! Physical configuration, user mobility and UAV-user geometry.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, StreamTag};

/// Horizontal position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// UAV positions indexed `[episode][uav]`.
pub type Placement = Vec<Vec<Point>>;

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Arena {
    pub fn square(side: f64) -> Self {
        Arena {
            xmin: 0.0,
            xmax: side,
            ymin: 0.0,
            ymax: side,
        }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(
            rng.random_range(self.xmin..=self.xmax),
            rng.random_range(self.ymin..=self.ymax),
        )
    }

    /// Specular reflection of a point that left the arena by less than one
    /// width/height.
    pub fn reflect(&self, p: Point) -> Point {
        Point::new(fold(p.x, self.xmin, self.xmax), fold(p.y, self.ymin, self.ymax))
    }
}

fn fold(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        (2.0 * lo - v).min(hi)
    } else if v > hi {
        (2.0 * hi - v).max(lo)
    } else {
        v
    }
}

/// Configuration as ingested from JSON. Powers and gains are in dB units here;
/// [`ScenarioConfig`] holds the validated linear-unit form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub m: usize,
    pub k: usize,
    pub l: usize,
    pub n_episodes: usize,
    pub episode_duration_s: f64,
    pub altitude_m: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub ref_gain_db: f64,
    pub uav_speed_max_mps: f64,
    pub user_speed_mps: f64,
    pub arena_m: [f64; 4],
    pub seed: u64,
}

impl Default for RawConfig {
    /// The simulation setup with `L = 3` groups of `K = 6` users, ten UAVs and
    /// a desk-scale horizon of ten 0.2 s episodes.
    fn default() -> Self {
        RawConfig {
            m: 10,
            k: 6,
            l: 3,
            n_episodes: 10,
            episode_duration_s: 0.2,
            altitude_m: 100.0,
            tx_power_dbm: 23.0,
            noise_psd_dbm_hz: -169.0,
            bandwidth_hz: 10e6,
            ref_gain_db: -40.0,
            uav_speed_max_mps: 10.0,
            user_speed_mps: 15.0,
            arena_m: [0.0, 500.0, 0.0, 500.0],
            seed: 1,
        }
    }
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("config JSON: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct serializes")
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Maximum horizontal displacement per UAV per episode transition, indexed
/// `[uav][edge]` where edge `n` joins episode `n` to `n + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementBudgets {
    budgets: Vec<Vec<f64>>,
}

impl DisplacementBudgets {
    pub fn uniform(num_uavs: usize, num_episodes: usize, d: f64) -> Self {
        DisplacementBudgets {
            budgets: vec![vec![d; num_episodes.saturating_sub(1)]; num_uavs],
        }
    }

    pub fn from_matrix(budgets: Vec<Vec<f64>>) -> Result<Self> {
        if budgets.iter().flatten().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::config("displacement budgets must be finite and >= 0"));
        }
        Ok(DisplacementBudgets { budgets })
    }

    /// Budget of UAV `m` between episode `n` and `n + 1`.
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.budgets[m][n]
    }

    pub fn num_uavs(&self) -> usize {
        self.budgets.len()
    }

    pub fn num_edges(&self) -> usize {
        self.budgets.first().map_or(0, Vec::len)
    }
}

/// Validated scenario constants, all in linear SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    raw: RawConfig,
    tx_power: f64,
    noise_power: f64,
    ref_gain: f64,
    arena: Arena,
    budget_override: Option<DisplacementBudgets>,
}

impl ScenarioConfig {
    pub fn new(raw: RawConfig) -> Result<Self> {
        if raw.m < 2 {
            return Err(Error::config("at least two UAVs are required"));
        }
        if raw.k == 0 || raw.l == 0 {
            return Err(Error::config("k and l must be positive"));
        }
        if raw.k >= raw.m {
            return Err(Error::config(format!(
                "users per group k = {} must be smaller than the number of UAVs m = {}",
                raw.k, raw.m
            )));
        }
        if raw.n_episodes == 0 {
            return Err(Error::config("n_episodes must be >= 1"));
        }
        let positive = [
            ("episode_duration_s", raw.episode_duration_s),
            ("bandwidth_hz", raw.bandwidth_hz),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be finite and > 0")));
            }
        }
        let finite = [
            ("tx_power_dbm", raw.tx_power_dbm),
            ("noise_psd_dbm_hz", raw.noise_psd_dbm_hz),
            ("ref_gain_db", raw.ref_gain_db),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite")));
            }
        }
        // H = 0 is admitted for ground-deployed static units.
        if !(raw.altitude_m.is_finite() && raw.altitude_m >= 0.0) {
            return Err(Error::config("altitude_m must be finite and >= 0"));
        }
        for (name, v) in [
            ("uav_speed_max_mps", raw.uav_speed_max_mps),
            ("user_speed_mps", raw.user_speed_mps),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{name} must be finite and >= 0")));
            }
        }
        let [xmin, xmax, ymin, ymax] = raw.arena_m;
        if !(xmin < xmax && ymin < ymax) || raw.arena_m.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("arena_m must be [xmin, xmax, ymin, ymax] with min < max"));
        }
        let arena = Arena { xmin, xmax, ymin, ymax };
        let step = raw.user_speed_mps * raw.episode_duration_s;
        if step > arena.width().min(arena.height()) {
            return Err(Error::config(format!(
                "arena {}x{} m cannot contain one user step of {step} m",
                arena.width(),
                arena.height()
            )));
        }
        Ok(ScenarioConfig {
            tx_power: dbm_to_watts(raw.tx_power_dbm),
            noise_power: dbm_to_watts(raw.noise_psd_dbm_hz) * raw.bandwidth_hz,
            ref_gain: db_to_linear(raw.ref_gain_db),
            arena,
            budget_override: None,
            raw,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(RawConfig::from_json(text)?)
    }

    pub fn raw(&self) -> &RawConfig {
        &self.raw
    }

    /// Re-validates a modified copy of the raw configuration.
    pub fn modified(&self, f: impl FnOnce(&mut RawConfig)) -> Result<Self> {
        let mut raw = self.raw.clone();
        f(&mut raw);
        let mut cfg = Self::new(raw)?;
        cfg.budget_override = self.budget_override.clone();
        Ok(cfg)
    }

    /// Replaces the uniform speed-derived budgets with per-UAV, per-episode
    /// values.
    pub fn with_budgets(mut self, budgets: DisplacementBudgets) -> Result<Self> {
        if budgets.num_uavs() != self.num_uavs() || budgets.num_edges() + 1 != self.num_episodes() {
            return Err(Error::config("budget matrix shape must be m x (n_episodes - 1)"));
        }
        self.budget_override = Some(budgets);
        Ok(self)
    }

    pub fn num_uavs(&self) -> usize {
        self.raw.m
    }
    pub fn users_per_group(&self) -> usize {
        self.raw.k
    }
    pub fn num_groups(&self) -> usize {
        self.raw.l
    }
    pub fn total_users(&self) -> usize {
        self.raw.k * self.raw.l
    }
    pub fn num_episodes(&self) -> usize {
        self.raw.n_episodes
    }
    pub fn episode_duration(&self) -> f64 {
        self.raw.episode_duration_s
    }
    pub fn altitude(&self) -> f64 {
        self.raw.altitude_m
    }
    /// Transmit power in watts.
    pub fn tx_power(&self) -> f64 {
        self.tx_power
    }
    /// Noise power over the whole bandwidth, in watts.
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }
    /// Channel power gain at 1 m (linear).
    pub fn ref_gain(&self) -> f64 {
        self.ref_gain
    }
    pub fn uav_speed_max(&self) -> f64 {
        self.raw.uav_speed_max_mps
    }
    pub fn user_speed(&self) -> f64 {
        self.raw.user_speed_mps
    }
    pub fn arena(&self) -> Arena {
        self.arena
    }
    pub fn seed(&self) -> u64 {
        self.raw.seed
    }

    /// Group of global user index `u` (users are numbered `l * K + k`).
    pub fn group_of(&self, u: usize) -> usize {
        u / self.raw.k
    }
}

/// Distance between a UAV at altitude `altitude` and a ground user.
pub fn link_distance(uav: Point, user: Point, altitude: f64) -> f64 {
    let dx = uav.x - user.x;
    let dy = uav.y - user.y;
    (dx * dx + dy * dy + altitude * altitude).sqrt()
}

/// Per-edge displacement budgets: speed limit times episode duration unless
/// the configuration carries explicit budgets.
pub fn displacement_budget(config: &ScenarioConfig) -> DisplacementBudgets {
    match &config.budget_override {
        Some(b) => b.clone(),
        None => DisplacementBudgets::uniform(
            config.num_uavs(),
            config.num_episodes(),
            config.uav_speed_max() * config.episode_duration(),
        ),
    }
}

/// Nominal user positions `[episode][user]` and, once planned, UAV positions
/// `[episode][uav]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTracks {
    pub users: Vec<Vec<Point>>,
    pub uavs: Placement,
}

impl EpisodeTracks {
    pub fn from_users(users: Vec<Vec<Point>>) -> Self {
        EpisodeTracks { users, uavs: Vec::new() }
    }

    pub fn num_episodes(&self) -> usize {
        self.users.len()
    }

    pub fn num_users(&self) -> usize {
        self.users.first().map_or(0, Vec::len)
    }

    /// Restriction to a contiguous range of episodes.
    pub fn window(&self, range: std::ops::Range<usize>) -> EpisodeTracks {
        EpisodeTracks {
            users: self.users[range.clone()].to_vec(),
            uavs: if self.uavs.is_empty() {
                Vec::new()
            } else {
                self.uavs[range].to_vec()
            },
        }
    }

    pub fn check_shape(&self, config: &ScenarioConfig) -> Result<()> {
        if self.users.len() != config.num_episodes() {
            return Err(Error::config(format!(
                "tracks have {} episodes, configuration expects {}",
                self.users.len(),
                config.num_episodes()
            )));
        }
        if self.users.iter().any(|e| e.len() != config.total_users()) {
            return Err(Error::config(format!(
                "every episode must hold {} users",
                config.total_users()
            )));
        }
        Ok(())
    }
}

/// Random-direction constant-speed mobility with specular reflection at the
/// arena boundary. Episode-one positions are uniform over the arena.
pub fn generate_user_tracks(config: &ScenarioConfig) -> Result<EpisodeTracks> {
    let arena = config.arena();
    let step = config.user_speed() * config.episode_duration();
    if step > arena.width().min(arena.height()) {
        return Err(Error::config("arena too small to contain one user step"));
    }
    let mut rng = substream(config.seed(), StreamTag::UserTracks, &[]);
    let mut users = Vec::with_capacity(config.num_episodes());
    let first: Vec<Point> = (0..config.total_users()).map(|_| arena.sample(&mut rng)).collect();
    users.push(first);
    for n in 1..config.num_episodes() {
        let next = users[n - 1]
            .iter()
            .map(|p| {
                let theta = rng.random_range(0.0..2.0 * PI);
                arena.reflect(Point::new(p.x + step * theta.cos(), p.y + step * theta.sin()))
            })
            .collect();
        users.push(next);
    }
    Ok(EpisodeTracks::from_users(users))
}
