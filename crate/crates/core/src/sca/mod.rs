//! Successive convex approximation for the max-min average-rate problem.
//!
//! The non-convex placement problem is rewritten in epigraph form with one
//! auxiliary variable `c` per (user, UAV, episode) standing in for `d^-2`.
//! The only non-convex constraint, `d^2 <= 1/c`, is replaced by its tangent
//! under-estimator at the current point `c~` (see [`linearize_inverse`]),
//! which makes each subproblem convex. [`run_sca`] solves the sequence of
//! subproblems with [`solve_convex_subproblem`], re-linearizing at `d^-2` of
//! the new positions each round.

mod algorithm;
mod barrier;
mod kkt;
mod linearize;
mod subproblem;

pub use algorithm::{run_sca, tightness, ScaSettings, ScaTrace};
pub use barrier::{solve_convex_subproblem, BarrierSettings, Duals, KktResiduals, LinkDual, SubproblemSolution};
pub use kkt::{verify_weighted_average, SlotResidual, WeightedAverageReport};
pub use linearize::linearize_inverse;
pub use subproblem::{
    build_subproblem, inverse_square_distances, DisplacementLink, LinkEnd, ScaMode, SlotRef, SubproblemKind, SubproblemSpec, C_MIN,
};
