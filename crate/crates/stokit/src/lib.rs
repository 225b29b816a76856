//! stokit: a toolkit for stochastic dynamics.
//!
//! The crate simulates Ito stochastic differential equations on realized
//! two-sided Brownian paths and cross-validates everything it computes:
//! numerical schemes against closed-form solutions, Ito-calculus identities
//! by Monte Carlo, generator boundary-value problems against first-exit
//! simulation, almost-sure invariant manifolds built by characteristics
//! against direct simulation, and cocycle/stationary-orbit identities of the
//! associated random dynamical system.
//!
//! Everything random is counter-keyed (see [`rng`]), so any experiment is
//! bit-reproducible for a fixed master seed, independent of thread count.

// `!(x > 0.0)` deliberately rejects NaN along with the out-of-range values;
// indexed loops mirror the stencil/axis structure of the math they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod brownian;
pub mod calculus;
pub mod error;
pub mod exact;
pub mod exit;
pub mod integrate;
pub mod linalg;
pub mod manifold;
pub mod model;
pub mod moments;
pub mod rds;
pub mod rng;
pub mod stats;

pub use brownian::BrownianPath;
pub use error::{Error, Result};
pub use model::{ScalarObservable, SdeModel};
