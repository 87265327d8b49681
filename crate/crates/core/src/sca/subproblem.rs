use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::RateParams;
use crate::scenario::{displacement_budget, link_distance, EpisodeTracks, Placement, Point, ScenarioConfig};

/// Smallest admissible auxiliary value `c` (m^-2).
pub const C_MIN: f64 = 1e-12;

/// Which problem the subproblem approximates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScaMode {
    /// All episodes jointly, consecutive positions tied by displacement budgets.
    Joint,
    /// One episode only. With an anchor, each UAV must stay within its budget
    /// of the anchor (its previous-episode position); without one it is free.
    SingleEpisode { episode: usize, anchor: Option<Vec<Point>> },
    /// One position per UAV shared by all episodes.
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubproblemKind {
    Joint,
    SingleEpisode,
    Static,
}

/// Position of UAV `m` in episode `n` of the window: either a decision
/// variable (a slot, possibly shared with other episodes) or a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SlotRef {
    Var(usize),
    Fixed(Point),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LinkEnd {
    Slot(usize),
    Anchor(Point),
}

/// `|to - from|^2 <= budget^2`, for UAV `uav` between episode `episode` of
/// the window and the one after it (or its anchor).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementLink {
    pub uav: usize,
    pub episode: usize,
    pub from: LinkEnd,
    pub to: usize,
    pub budget: f64,
}

/// One convex surrogate problem: maximize `R` subject to the rate
/// constraints, the linearized distance constraints and the displacement
/// constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSpec {
    pub kind: SubproblemKind,
    /// First absolute episode covered by the window.
    pub first_episode: usize,
    pub num_uavs: usize,
    pub altitude: f64,
    /// `P tau0 (M - K) / (M sigma^2)`, in m^2.
    pub rate_gain: f64,
    /// `1 / (N L)` for multi-episode windows, `1 / L` for one episode.
    pub prefactor: f64,
    /// User positions, `[n][u]`.
    pub users: Vec<Vec<Point>>,
    /// Linearization points `c~`, `[n][u][m]`, in m^-2.
    pub lin_points: Vec<Vec<Vec<f64>>>,
    /// Position of each UAV per episode, `[n][m]`.
    pub slots: Vec<Vec<SlotRef>>,
    pub num_slots: usize,
    pub links: Vec<DisplacementLink>,
    /// Starting position of each slot.
    pub start: Vec<Point>,
    /// Slot positions of the given start when they had to be moved to build
    /// `start`. Still feasible, so a solver may return them.
    #[serde(default)]
    pub incumbent: Option<Vec<Point>>,
    pub c_min: f64,
}

impl SubproblemSpec {
    pub fn num_episodes(&self) -> usize {
        self.users.len()
    }

    pub fn num_users(&self) -> usize {
        self.users.first().map_or(0, Vec::len)
    }

    /// Positions, auxiliaries and the epigraph variable.
    pub fn variable_count(&self) -> usize {
        2 * self.num_slots + self.num_users() * self.num_uavs * self.num_episodes() + 1
    }

    /// Position of UAV `m` in window episode `n` under slot values `slots`.
    pub fn position(&self, slot_values: &[Point], n: usize, m: usize) -> Point {
        match self.slots[n][m] {
            SlotRef::Var(s) => slot_values[s],
            SlotRef::Fixed(p) => p,
        }
    }

    pub fn placement(&self, slot_values: &[Point]) -> Placement {
        (0..self.num_episodes())
            .map(|n| (0..self.num_uavs).map(|m| self.position(slot_values, n, m)).collect())
            .collect()
    }

    /// Average rate of user `u` implied by the auxiliaries `c[n][u][m]`.
    pub fn user_rate(&self, c: &[Vec<Vec<f64>>], u: usize) -> f64 {
        c.iter()
            .map(|cn| (self.rate_gain * cn[u].iter().sum::<f64>()).ln_1p())
            .sum::<f64>()
            * self.prefactor
            / std::f64::consts::LN_2
    }

    /// Minimum over users of the average lower-bound rate at `placement`,
    /// i.e. the objective with every `c` equal to `d^-2`.
    pub fn objective_at(&self, placement: &Placement) -> f64 {
        let c = inverse_square_distances(&self.users, placement, self.altitude);
        (0..self.num_users())
            .map(|u| self.user_rate(&c, u))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `d^-2` for every (episode, user, UAV) of a window.
pub fn inverse_square_distances(users: &[Vec<Point>], placement: &Placement, altitude: f64) -> Vec<Vec<Vec<f64>>> {
    users
        .iter()
        .zip(placement)
        .map(|(un, pn)| {
            un.iter()
                .map(|a| pn.iter().map(|p| link_distance(*p, *a, altitude).powi(-2)).collect())
                .collect()
        })
        .collect()
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut j = i;
    while parent[j] != r {
        let next = parent[j];
        parent[j] = r;
        j = next;
    }
    r
}

/// Assembles the surrogate problem around `lin_points` (`[n][u][m]` over the
/// mode's window). `start` gives the starting placement of the window,
/// `[n][m]`; it is pulled strictly inside any displacement budget it breaks.
pub fn build_subproblem(
    tracks: &EpisodeTracks,
    config: &ScenarioConfig,
    lin_points: &[Vec<Vec<f64>>],
    mode: &ScaMode,
    start: &Placement,
) -> Result<SubproblemSpec> {
    tracks.check_shape(config)?;
    let params = RateParams::from_config(config);
    let m_count = config.num_uavs();
    let users_total = config.total_users();
    let h = config.altitude();
    let budgets = displacement_budget(config);

    let (window, kind) = match mode {
        ScaMode::Joint => (0..tracks.num_episodes(), SubproblemKind::Joint),
        ScaMode::Static => (0..tracks.num_episodes(), SubproblemKind::Static),
        ScaMode::SingleEpisode { episode, .. } => {
            if *episode >= tracks.num_episodes() {
                return Err(Error::domain(format!(
                    "episode {episode} out of range (tracks have {})",
                    tracks.num_episodes()
                )));
            }
            (*episode..*episode + 1, SubproblemKind::SingleEpisode)
        }
    };
    let n_count = window.len();
    let users: Vec<Vec<Point>> = tracks.users[window.clone()].to_vec();

    if lin_points.len() != n_count
        || lin_points.iter().any(|ln| ln.len() != users_total || ln.iter().any(|l| l.len() != m_count))
    {
        return Err(Error::domain(format!(
            "linearization points must be {n_count} x {users_total} x {m_count}"
        )));
    }
    if start.len() != n_count || start.iter().any(|p| p.len() != m_count) {
        return Err(Error::domain(format!("start placement must be {n_count} x {m_count}")));
    }
    let c_max = if h > 0.0 { 1.0 / (h * h) } else { f64::INFINITY };
    for v in lin_points.iter().flatten().flatten() {
        if !(*v >= C_MIN && *v <= c_max * (1.0 + 1e-12)) {
            return Err(Error::domain(format!(
                "linearization point {v} outside [{C_MIN}, {c_max}]"
            )));
        }
    }

    let mut slots = vec![vec![SlotRef::Var(0); m_count]; n_count];
    let mut links = Vec::new();
    let mut start_slots: Vec<Point> = Vec::new();
    let mut given: Vec<Point> = Vec::new();

    match mode {
        ScaMode::Static => {
            start_slots = start[0].clone();
            given = start_slots.clone();
            for row in slots.iter_mut() {
                for (m, s) in row.iter_mut().enumerate() {
                    *s = SlotRef::Var(m);
                }
            }
        }
        ScaMode::Joint => {
            // Episodes joined by a zero budget share one position variable.
            for m in 0..m_count {
                let mut parent: Vec<usize> = (0..n_count).collect();
                for n in 0..n_count.saturating_sub(1) {
                    if budgets.get(m, n) == 0.0 {
                        let (a, b) = (find(&mut parent, n), find(&mut parent, n + 1));
                        parent[b] = a;
                    }
                }
                let mut slot_of_root = vec![usize::MAX; n_count];
                for n in 0..n_count {
                    let r = find(&mut parent, n);
                    if slot_of_root[r] == usize::MAX {
                        slot_of_root[r] = start_slots.len();
                        start_slots.push(start[n][m]);
                    }
                    slots[n][m] = SlotRef::Var(slot_of_root[r]);
                }
                for n in 0..n_count.saturating_sub(1) {
                    let d = budgets.get(m, n);
                    if d > 0.0 && d.is_finite() {
                        let (SlotRef::Var(a), SlotRef::Var(b)) = (slots[n][m], slots[n + 1][m]) else {
                            unreachable!()
                        };
                        links.push(DisplacementLink {
                            uav: m,
                            episode: n,
                            from: LinkEnd::Slot(a),
                            to: b,
                            budget: d,
                        });
                    }
                }
            }
            given = start_slots.clone();
            repair_chain(&mut start_slots, &links);
        }
        ScaMode::SingleEpisode { episode, anchor } => {
            if let Some(anchor) = anchor {
                if anchor.len() != m_count {
                    return Err(Error::domain(format!("anchor must hold {m_count} positions")));
                }
            }
            for m in 0..m_count {
                let budget = match anchor {
                    None => f64::INFINITY,
                    Some(_) if budgets.num_edges() == 0 => f64::INFINITY,
                    Some(_) => budgets.get(m, episode.saturating_sub(1).min(budgets.num_edges() - 1)),
                };
                match anchor {
                    Some(anchor) if budget == 0.0 => slots[0][m] = SlotRef::Fixed(anchor[m]),
                    Some(anchor) if budget.is_finite() => {
                        let s = start_slots.len();
                        slots[0][m] = SlotRef::Var(s);
                        given.push(start[0][m]);
                        start_slots.push(pull_inside(anchor[m], start[0][m], budget));
                        links.push(DisplacementLink {
                            uav: m,
                            episode: 0,
                            from: LinkEnd::Anchor(anchor[m]),
                            to: s,
                            budget,
                        });
                    }
                    _ => {
                        slots[0][m] = SlotRef::Var(start_slots.len());
                        given.push(start[0][m]);
                        start_slots.push(start[0][m]);
                    }
                }
            }
        }
    }

    let feasible = links.iter().all(|l| {
        let from = match l.from {
            LinkEnd::Slot(a) => given[a],
            LinkEnd::Anchor(p) => p,
        };
        from.dist(&given[l.to]) < l.budget
    });
    let incumbent = (given != start_slots && feasible).then_some(given);
    let prefactor = 1.0 / (n_count as f64 * params.num_groups as f64);
    Ok(SubproblemSpec {
        kind,
        first_episode: window.start,
        num_uavs: m_count,
        altitude: h,
        rate_gain: params.lower_bound_gain(),
        prefactor,
        users,
        lin_points: lin_points.to_vec(),
        slots,
        num_slots: start_slots.len(),
        links,
        start: start_slots,
        incumbent,
        c_min: C_MIN,
    })
}

/// Fraction of the budget used when a start position has to be moved.
const PULL_FRACTION: f64 = 0.99;

fn pull_inside(anchor: Point, p: Point, budget: f64) -> Point {
    let d = anchor.dist(&p);
    if d < budget * PULL_FRACTION {
        return p;
    }
    let s = budget * PULL_FRACTION / d;
    Point::new(anchor.x + (p.x - anchor.x) * s, anchor.y + (p.y - anchor.y) * s)
}

/// Walks each chain of links in order, pulling every endpoint strictly inside
/// the budget of its predecessor.
fn repair_chain(start: &mut [Point], links: &[DisplacementLink]) {
    for link in links {
        if let LinkEnd::Slot(a) = link.from {
            start[link.to] = pull_inside(start[a], start[link.to], link.budget);
        }
    }
}
