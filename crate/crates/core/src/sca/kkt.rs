use serde::{Deserialize, Serialize};

use super::barrier::SubproblemSolution;
use super::subproblem::{LinkEnd, SlotRef, SubproblemSpec};

/// Distance between a UAV position and the dual-weighted average of the
/// points it is attracted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotResidual {
    pub uav: usize,
    /// Absolute episode index.
    pub episode: usize,
    pub residual_x: f64,
    pub residual_y: f64,
    /// All weights vanish, so the average is undefined.
    pub indeterminate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedAverageReport {
    pub entries: Vec<SlotResidual>,
    /// Largest residual over determinate entries, in meters.
    pub max_residual: f64,
    pub indeterminate: usize,
}

impl WeightedAverageReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

/// Checks that every free UAV position equals the weighted average of its
/// users' positions (weights: distance multipliers) and its neighbouring
/// positions in time (weights: displacement multipliers).
pub fn verify_weighted_average(solution: &SubproblemSolution, spec: &SubproblemSpec) -> WeightedAverageReport {
    let ns = spec.num_slots;
    let mut num = vec![(0.0, 0.0); ns];
    let mut den = vec![0.0; ns];
    let pos = &solution.slot_positions;

    for (e, row) in spec.slots.iter().enumerate() {
        for (m, slot) in row.iter().enumerate() {
            if let SlotRef::Var(s) = slot {
                for (u, a) in spec.users[e].iter().enumerate() {
                    let w = solution.duals.distance[e][u][m];
                    num[*s].0 += w * a.x;
                    num[*s].1 += w * a.y;
                    den[*s] += w;
                }
            }
        }
    }
    for (link, dual) in spec.links.iter().zip(&solution.duals.displacement) {
        let w = dual.value;
        let to = pos[link.to];
        match link.from {
            LinkEnd::Slot(a) => {
                let from = pos[a];
                num[a].0 += w * to.x;
                num[a].1 += w * to.y;
                den[a] += w;
                num[link.to].0 += w * from.x;
                num[link.to].1 += w * from.y;
                den[link.to] += w;
            }
            LinkEnd::Anchor(p) => {
                num[link.to].0 += w * p.x;
                num[link.to].1 += w * p.y;
                den[link.to] += w;
            }
        }
    }

    let scale = den.iter().cloned().fold(0.0, f64::max);
    let mut entries = Vec::new();
    let mut max_residual: f64 = 0.0;
    let mut indeterminate = 0;
    for (e, row) in spec.slots.iter().enumerate() {
        for (m, slot) in row.iter().enumerate() {
            let SlotRef::Var(s) = *slot else { continue };
            let degenerate = !(den[s] > 1e-14 * scale) || !den[s].is_finite();
            let (rx, ry) = if degenerate {
                (f64::NAN, f64::NAN)
            } else {
                (
                    (pos[s].x - num[s].0 / den[s]).abs(),
                    (pos[s].y - num[s].1 / den[s]).abs(),
                )
            };
            if degenerate {
                indeterminate += 1;
            } else {
                max_residual = max_residual.max(rx).max(ry);
            }
            entries.push(SlotResidual {
                uav: m,
                episode: spec.first_episode + e,
                residual_x: rx,
                residual_y: ry,
                indeterminate: degenerate,
            });
        }
    }
    WeightedAverageReport {
        entries,
        max_residual,
        indeterminate,
    }
}
