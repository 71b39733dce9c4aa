//! Replica-symmetric saddle-point theory of ridge-penalized Cox regression.
//!
//! Seven scalar order parameters `(ũ, v, w, f̃, g̃, q, ρ)` solve the system
//! evaluated in [`rs_residuals`]. The solution predicts
//!
//! * the slope `κ = w/S̃` and width `v` of the inferred-vs-true coefficient
//!   cloud (`S̃ = S⟨a⟩^{1/2}`),
//! * the distortion `Λ(t) = k Λ⁰(t)^ρ` of the inferred baseline hazard, with
//!   `q = k ũ² e^{ũ²}`,
//! * the asymptotic overfitting measure `E` ([`overfit_measure`]).

mod calibrate;
mod equations;
mod limits;
mod newton;
mod overfit;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

pub use crate::special::Quadrature;
pub use calibrate::{
    calibrate_eta, external_penalty_lambda, verify_penalty_equivalence, CalibrateOptions,
    Calibration, PENALTY_TABLE,
};
pub use equations::{rs_residuals, Residuals, NUM_EQUATIONS};
pub use limits::{large_zeta_solve, ml_limit_solve, LargeZetaLimit};
pub use newton::NewtonOptions;
pub use overfit::overfit_measure;
pub use solver::{
    rs_solve, rs_solve_or_asymptotic, rs_sweep, small_zeta_init, SolveOptions, SweepPoint,
};

/// Theory input: `ζ = p/N`, prior strength `η` in `p(b) ∝ exp(−η‖b‖²)`,
/// signal strength `S² = p⁻¹‖β⁰‖²`, and the covariance spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub zeta: f64,
    pub eta: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub spectrum: Spectrum,
}

impl ModelParams {
    pub fn new(zeta: f64, eta: f64, s: f64, spectrum: Spectrum) -> Result<Self> {
        if !(zeta > 0.0 && zeta.is_finite()) {
            return Err(Error::Parameter(format!(
                "zeta must be positive, got {zeta}"
            )));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::Parameter(format!(
                "eta must be nonnegative, got {eta}"
            )));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Parameter(format!("S must be positive, got {s}")));
        }
        Ok(ModelParams {
            zeta,
            eta,
            s,
            spectrum,
        })
    }

    /// `S̃ = S⟨a⟩^{1/2}`
    pub fn s_tilde(&self) -> f64 {
        self.s * self.spectrum.mean().sqrt()
    }

    pub fn with_zeta(&self, zeta: f64) -> Self {
        ModelParams {
            zeta,
            ..self.clone()
        }
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        ModelParams {
            eta,
            ..self.clone()
        }
    }
}

/// RS order parameters plus the quantities derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParams {
    pub u_tilde: f64,
    pub v: f64,
    pub w: f64,
    pub f_tilde: f64,
    pub g_tilde: f64,
    pub q: f64,
    pub rho: f64,
    /// `σ = √((w − ρS̃)² + v²)`
    pub sigma: f64,
    /// `k = q e^{−ũ²} / ũ²`
    pub k: f64,
    pub s_tilde: f64,
    /// `κ = w / S̃`
    pub kappa: f64,
    /// Overfitting measure `E(S)`; NaN when it cannot be evaluated.
    #[serde(rename = "E")]
    pub e: f64,
}

/// The seven primary unknowns, before derived quantities are attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primary {
    pub u2: f64,
    pub v: f64,
    pub w: f64,
    pub f_tilde: f64,
    pub g_tilde: f64,
    pub q: f64,
    pub rho: f64,
}

impl Primary {
    /// Unconstrained coordinates `(ln ũ², v, w, ln(−f̃), ln g̃, ln q, ln ρ)`.
    pub(crate) fn to_coords(self) -> [f64; 7] {
        [
            self.u2.ln(),
            self.v,
            self.w,
            (-self.f_tilde).ln(),
            self.g_tilde.ln(),
            self.q.ln(),
            self.rho.ln(),
        ]
    }

    pub(crate) fn from_coords(x: &[f64]) -> Self {
        Primary {
            u2: x[0].exp(),
            v: x[1].abs(),
            w: x[2],
            f_tilde: -x[3].exp(),
            g_tilde: x[4].exp(),
            q: x[5].exp(),
            rho: x[6].exp(),
        }
    }

    pub fn sigma(&self, s_tilde: f64) -> f64 {
        (self.w - self.rho * s_tilde).hypot(self.v)
    }

    pub fn k(&self) -> f64 {
        self.q * (-self.u2).exp() / self.u2
    }
}

impl OrderParams {
    pub fn from_primary(p: Primary, mp: &ModelParams) -> Self {
        let s_tilde = mp.s_tilde();
        let mut op = OrderParams {
            u_tilde: p.u2.sqrt(),
            v: p.v,
            w: p.w,
            f_tilde: p.f_tilde,
            g_tilde: p.g_tilde,
            q: p.q,
            rho: p.rho,
            sigma: p.sigma(s_tilde),
            k: p.k(),
            s_tilde,
            kappa: p.w / s_tilde,
            e: f64::NAN,
        };
        op.e = overfit_measure(&op, mp).unwrap_or(f64::NAN);
        op
    }

    pub fn primary(&self) -> Primary {
        Primary {
            u2: self.u_tilde * self.u_tilde,
            v: self.v,
            w: self.w,
            f_tilde: self.f_tilde,
            g_tilde: self.g_tilde,
            q: self.q,
            rho: self.rho,
        }
    }

    pub fn u2(&self) -> f64 {
        self.u_tilde * self.u_tilde
    }
}

/// A solved (or asymptotically approximated) RS state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub params: OrderParams,
    pub residual_norm: f64,
    pub converged: bool,
    /// Set when the values are the small-ζ expansion rather than a solve.
    pub asymptotic: bool,
    pub iterations: usize,
}
