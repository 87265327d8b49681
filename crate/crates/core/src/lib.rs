//! Placement and movement optimization for aerial relays that serve moving
//! ground users through coordinated zero-forcing reception at a central
//! processor.
//!
//! The crate is organized bottom-up:
//!
//! - [`scenario`]: physical configuration, user mobility, link geometry.
//! - [`channel`]: channel-matrix samplers (LoS with random phase, Rayleigh,
//!   isotropic Rayleigh).
//! - [`rates`]: zero-forcing beamformers, Monte-Carlo ergodic rates and the
//!   closed-form upper/lower rate bounds.
//! - [`sca`]: the epigraph reformulation, its first-order linearization, a
//!   log-barrier interior-point subproblem solver and the successive convex
//!   approximation loop.
//! - [`planners`]: full-information, receding-horizon and static deployment
//!   planners plus Monte-Carlo evaluation of a plan.

pub mod channel;
pub mod error;
pub mod planners;
pub mod rates;
pub mod rng;
pub mod sca;
pub mod scenario;

pub use channel::{ChannelMatrix, ChannelModel};
pub use error::{Error, Result};
pub use planners::{PlanMode, PlanOptions, PlanResult};
pub use rates::{RateKind, RateParams, RateReport};
pub use sca::{ScaMode, ScaSettings, ScaTrace, SubproblemSolution, SubproblemSpec};
pub use scenario::{Arena, DisplacementBudgets, EpisodeTracks, Placement, Point, ScenarioConfig};
