//! Strong Gaussian approximation laboratory.
//!
//! - [`dist`]: exact calculus of finite-support lattice laws.
//! - [`gauge`]: membership certificates and minimal parameters for the
//!   Sakhanenko, Bernstein-type and analytic cumulant classes.
//! - [`coupler`]: dyadic conditional-quantile couplings of partial sums with
//!   Gaussian partners, plus baselines.
//! - [`transport`]: exact Prokhorov distances and maximal couplings by max-flow.
//! - [`harness`]: reproducible Monte Carlo experiments, fits and reports.

pub mod dist;
pub mod coupler;
pub mod error;
pub mod gauge;
pub mod harness;
pub mod transport;

pub use dist::GridDist;
pub use error::{Error, Result};
