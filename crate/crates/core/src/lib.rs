//! Replica-symmetric overfitting theory for ridge-penalized Cox regression.
//!
//! The crate solves the seven scalar saddle-point equations that describe
//! MAP inference in the Cox proportional hazards model with an L2 prior
//! `p(b) ∝ exp(-η‖b‖²)` (coefficients in units where the risk score is
//! `b·z/√p`), in the proportional regime `p, N → ∞` with `ζ = p/N` fixed.
//! From the solution it predicts the slope `κ` and width `v` of the cloud of
//! inferred versus true coefficients, the distortion `Λ(t) = k Λ⁰(t)^ρ` of the
//! inferred baseline hazard, and the regularization `η*` giving unbiased
//! slopes.
//!
//! Everything the theory predicts can be checked against the bundled
//! simulator ([`sim`]), penalized Cox fitter ([`fit`]) and experiment
//! [`harness`].
//!
//! ```
//! use coxrs::{rs, ModelParams, Spectrum};
//!
//! let mp = ModelParams::new(0.5, 0.1, 1.0, Spectrum::identity()).unwrap();
//! let sol = rs::rs_solve(&mp, None, &rs::SolveOptions::default()).unwrap();
//! assert!(sol.residual_norm < 1e-10);
//! assert!((sol.params.kappa - 1.0).abs() < 0.05);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fit;
pub mod harness;
pub mod io;
pub mod rs;
pub mod sim;
pub mod special;
pub mod spectrum;

pub use error::{Error, Result};
pub use fit::{FitOptions, FitResult, StepFunction};
pub use harness::ExperimentSummary;
pub use rs::{ModelParams, OrderParams, Quadrature, Solution};
pub use sim::{Cohort, CohortConfig, Correlation, CovariateDist};
pub use special::QuadratureRule;
pub use spectrum::{Spectrum, SpectrumModel};

/// Euler's constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
