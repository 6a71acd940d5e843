//! Percolation on lattice k-neighbor graphs of Z^d.
//!
//! Every vertex picks `k` of its `2d` nearest neighbors uniformly at random.
//! The picks define four graphs: directed (DnG), undirected union (UnG),
//! mutual picks only (BnG) and exclusive picks (XnG). The crate provides
//!
//! - exact single-edge, pair and degree laws ([`lattice`]),
//! - seeded Monte Carlo cluster exploration on the infinite lattice ([`explorer`]),
//! - exact enumeration for the second-moment (oriented percolation) criterion ([`walk_enum`]),
//! - evaluation of the closed-form percolation criteria ([`bounds`]),
//! - self-avoiding walk and dual-circuit counts with Peierls sums ([`saw`]),
//! - exhaustive local joint laws of dual edges ([`dual`]),
//! - the dimension-lowering coupling of the directed model ([`coupling`]).

pub mod bounds;
pub mod coupling;
pub mod dual;
pub mod error;
pub mod exec;
pub mod explorer;
pub mod lattice;
pub mod rational;
pub mod rng;
pub mod saw;
pub mod walk_enum;

pub use error::{Error, Result};
pub use exec::Execution;
pub use lattice::{ChoiceField, ChoiceSet, Direction, ModelSpec, Variant, Vertex};
pub use rational::Rational;

/// Default work budget for exhaustive enumerations (states or tree nodes).
pub const DEFAULT_BUDGET: u128 = 10_000_000_000;

/// Budget from `KNPERC_BUDGET` when set and parseable, else [`DEFAULT_BUDGET`].
pub fn budget_from_env() -> u128 {
    std::env::var("KNPERC_BUDGET")
        .ok()
        .and_then(|s| s.trim().replace('_', "").parse().ok())
        .unwrap_or(DEFAULT_BUDGET)
}
