//! Shared fixtures for the benchmarks.

use coxrs::rs::{rs_solve, SolveOptions};
use coxrs::sim::generate_cohort;
use coxrs::{Cohort, CohortConfig, ModelParams, OrderParams, Spectrum};

/// Identity-spectrum model with unit signal.
pub fn model(zeta: f64, eta: f64) -> ModelParams {
    ModelParams::new(zeta, eta, 1.0, Spectrum::identity()).expect("valid model")
}

/// Converged RS state at `(ζ, η)`.
pub fn solved(zeta: f64, eta: f64) -> OrderParams {
    rs_solve(&model(zeta, eta), None, &SolveOptions::default())
        .expect("solvable")
        .params
}

/// Gaussian cohort at `(p, N)`, replicate 0.
pub fn cohort(p: usize, n: usize) -> Cohort {
    generate_cohort(&CohortConfig::new(p, n, 1.0, 17), 0).expect("valid cohort")
}
