use serde::{Deserialize, Serialize};

use super::equations::integrals;
use super::newton::{newton, NewtonOutcome};
use super::solver::{continuation, SolveOptions};
use super::{ModelParams, OrderParams, Primary, Solution};
use crate::error::{Error, Result};
use crate::special::Quadrature;
use crate::spectrum::Spectrum;
use crate::EULER_GAMMA;

fn ml_primary(x: &[f64], s_tilde: f64) -> Primary {
    let u2 = x[0].exp();
    let v = x[1].abs();
    let rho = x[3].exp();
    Primary {
        u2,
        v,
        w: rho * s_tilde,
        f_tilde: -v * v / (u2 * u2),
        g_tilde: 1.0 / u2,
        q: x[2].exp(),
        rho,
    }
}

/// Residuals of the η → 0 system in `x = (ln ũ², v, ln q, ln ρ)`. With
/// `w = ρS̃`, `g̃ = 1/ũ²` and `f̃ = −v²/ũ⁴`, equations 3–5 hold identically
/// and `σ = v`.
fn ml_residuals(x: &[f64], zeta: f64, quad: &Quadrature) -> Vec<f64> {
    let (u2, v, rho) = (x[0].exp(), x[1].abs(), x[3].exp());
    let int = integrals(x[2], v, rho, u2, quad);
    vec![
        (zeta * v * v - int.centred_sq) / (u2 * u2),
        (zeta - int.saturation) / u2,
        1.0 - int.mean / u2,
        1.0 / rho - int.log_moment / u2 - EULER_GAMMA,
    ]
}

/// Solves the maximum-likelihood (η = 0) limit for `0 < ζ < 1`, continuing
/// in ζ from the small-ζ expansion.
pub fn ml_limit_solve(
    zeta: f64,
    s: f64,
    spectrum: &Spectrum,
    opts: &SolveOptions,
) -> Result<Solution> {
    if zeta >= 1.0 {
        return Err(Error::PhaseBoundary(format!(
            "maximum-likelihood limit exists only for zeta < 1, got {zeta}"
        )));
    }
    let mp = ModelParams::new(zeta, 0.0, s, spectrum.clone())?;
    let quad = &opts.quad;
    let solve_at = |z: f64, guess: &[f64]| {
        newton(
            |x: &[f64]| ml_residuals(x, z, quad),
            guess,
            &opts.newton,
            None,
        )
    };

    let z0 = zeta.min(opts.start_zeta);
    let x0 = [z0.ln(), z0.sqrt(), z0.ln() + z0, 0.0];
    let start = solve_at(z0, &x0);
    if !start.converged {
        return Err(Error::Convergence {
            what: "maximum-likelihood limit at the starting zeta",
            iterations: start.iterations,
            residual: start.residual,
        });
    }
    let out: NewtonOutcome = if z0 == zeta {
        start
    } else {
        let span = (zeta / z0).ln();
        let ds_cap = (opts.max_ratio.ln() / span).min(1.0);
        let path = |t: f64| (z0.ln() * (1.0 - t) + zeta.ln() * t).exp();
        let (x, last) = continuation(
            &start.x,
            ds_cap,
            opts.min_path_step,
            "maximum-likelihood continuation",
            |t, g| solve_at(if t >= 1.0 { zeta } else { path(t) }, g),
        )?;
        last.unwrap_or_else(|| solve_at(zeta, &x))
    };
    let p = ml_primary(&out.x, mp.s_tilde());
    Ok(Solution {
        params: OrderParams::from_primary(p, &mp),
        residual_norm: out.residual,
        converged: out.converged,
        asymptotic: false,
        iterations: out.iterations,
    })
}

/// The ζ → ∞ fixed point at fixed η > 0: `g̃ → 0`, `w → 0`, `ũ² → ⟨a⟩/2η`,
/// `σ → ρS̃`, with `Q = lim ζg̃ũ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargeZetaLimit {
    pub big_q: f64,
    pub q: f64,
    pub rho: f64,
    pub u2: f64,
}

/// Solves the two remaining equations for `(q, ρ)`; `Q` follows from the
/// saturation integral.
pub fn large_zeta_solve(
    eta: f64,
    s: f64,
    spectrum: &Spectrum,
    opts: &SolveOptions,
) -> Result<LargeZetaLimit> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Parameter(format!(
            "large-zeta limit requires eta > 0, got {eta}"
        )));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Parameter(format!("S must be positive, got {s}")));
    }
    let u2 = spectrum.mean() / (2.0 * eta);
    let s_tilde = s * spectrum.mean().sqrt();
    let quad = &opts.quad;
    let f = |x: &[f64]| {
        let rho = x[1].exp();
        let int = integrals(x[0], rho * s_tilde, rho, u2, quad);
        vec![
            1.0 - int.mean / u2,
            1.0 / rho
                - (int.log_moment + int.saturation * s_tilde * s_tilde * rho) / u2
                - EULER_GAMMA,
        ]
    };
    let mut last = None;
    for rho0 in [1.0_f64, 2.0, 3.0, 0.5, 5.0] {
        let out = newton(f, &[u2.ln() + u2, rho0.ln()], &opts.newton, None);
        if out.converged {
            let rho = out.x[1].exp();
            let int = integrals(out.x[0], rho * s_tilde, rho, u2, quad);
            return Ok(LargeZetaLimit {
                big_q: int.saturation,
                q: out.x[0].exp(),
                rho,
                u2,
            });
        }
        last = Some(out);
    }
    let last = last.expect("at least one start attempted");
    Err(Error::Convergence {
        what: "large-zeta limit",
        iterations: last.iterations,
        residual: last.residual,
    })
}
