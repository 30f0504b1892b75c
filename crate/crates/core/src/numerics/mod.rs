//! Numerical primitives: the exponential integral, adaptive quadrature,
//! a small quasi-Newton minimizer and goodness-of-fit statistics.
//!
//! Everything here is a pure function of its inputs and works in `f64`.

mod e1;
mod optim;
mod quad;
mod stats;

pub use e1::{exp_integral_e1, scaled_exp_integral_e1};
pub use optim::{minimize_bfgs, BfgsOptions, Minimum};
pub use quad::{integrate_adaptive, integrate_with_envelope, ExpEnvelope, Tolerance};
pub use stats::{kolmogorov_pvalue, ks_one_sample, ks_two_sample, KsResult};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("argument {value} outside the domain of {function}")]
    Domain { function: &'static str, value: f64 },
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate}, error bound {error})")]
    NonConvergence {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },
    #[error("integrand produced a non-finite value at t = {0}")]
    NonFiniteIntegrand(f64),
}
