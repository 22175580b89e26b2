//! Continuous-time dynamical systems for unique-games (2-Lin-k) instances.
//!
//! The pipeline: generate a 2-Lin-k system with a prescribed satisfiable
//! fraction ([`instance`]), embed it as a one-hot CNF formula over spin
//! variables ([`cnf`]), integrate the gradient / weight-growth dynamics whose
//! stable equilibria are exactly the solutions ([`dynamics`], [`integrate`]),
//! and measure hardness observables from the trajectories: vicinity residency
//! Y(delta), the scaling exponent f, finite-size Lyapunov exponents, and
//! ergodicity diagnostics ([`analysis`]). [`sweep`] orchestrates reproducible
//! parameter sweeps over (k, epsilon, delta, alpha).

pub mod analysis;
pub mod cnf;
pub mod dynamics;
pub mod error;
pub mod instance;
pub mod io;
pub mod integrate;
pub mod sweep;

pub use error::{Error, Result};

/// Tool version echoed into every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
