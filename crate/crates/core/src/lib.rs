//! Monte Carlo pricing of European options under stochastic volatility models,
//! expanded as a power series in the correlation `rho` between the asset noise
//! and the volatility noise.
//!
//! At `rho = 0` the price decouples into an expectation of Black-Scholes prices
//! at the random integrated variance. The series coefficients around that point
//! admit several Monte Carlo representations, all built from the same simulated
//! volatility paths:
//!
//! * **AS / ExpA order 1** — closed functionals of the integrated variance
//!   `<M>` and the correction functional `c` ([`estimators::estimate_g1`]);
//! * **ExpA order 2** — the `ell` functional ([`estimators::estimate_u2_exp_a`]),
//!   plus a general-order combinatorial form ([`estimators::estimate_un_general`]);
//! * **ExpM** — Malliavin integration-by-parts weights applied to the payoff
//!   at maturity ([`estimators::estimate_exp_m`]), optionally localized around
//!   the strike to cut variance.
//!
//! [`oracles`] provides the reference prices (semi-analytic Heston, high
//! resolution Monte Carlo) and finite-difference derivative checks used to
//! validate the estimators and to fill benchmark columns.

pub mod estimators;
pub mod math;
pub mod model;
pub mod oracles;
pub mod path;
pub mod rng;
pub mod stats;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
