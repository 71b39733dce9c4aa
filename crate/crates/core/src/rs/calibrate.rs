use serde::{Deserialize, Serialize};

use super::solver::{rs_solve, track, SolveOptions};
use super::{ModelParams, OrderParams, Primary, Solution};
use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

/// Published calibration points `(ζ, η*, λ)`, where `λ` is the penalty of an
/// external elastic-net package fitted to covariates scaled by `1/√p`.
pub const PENALTY_TABLE: [(f64, f64, f64); 4] = [
    (0.110, 0.165, 0.036),
    (0.552, 0.100, 0.110),
    (1.055, 0.062, 0.131),
    (2.001, 0.031, 0.124),
];

/// External-package penalty equivalent to prior strength `η` at `ζ`.
pub fn external_penalty_lambda(eta: f64, zeta: f64) -> f64 {
    2.0 * eta * zeta
}

/// Checks `λ = 2ηζ` against every row of [`PENALTY_TABLE`] to 2% relative.
pub fn verify_penalty_equivalence() -> Result<()> {
    for (zeta, eta, lambda) in PENALTY_TABLE {
        let implied = external_penalty_lambda(eta, zeta);
        if (implied / lambda - 1.0).abs() > 0.02 {
            return Err(Error::Domain(format!(
                "penalty conversion 2*eta*zeta = {implied:.4} disagrees with tabulated {lambda} at zeta = {zeta}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrateOptions {
    pub solve: SolveOptions,
    /// Target for `|κ(η*) − 1|`.
    pub tol: f64,
    pub eta_initial: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    pub max_iter: usize,
}

impl Default for CalibrateOptions {
    fn default() -> Self {
        CalibrateOptions {
            solve: SolveOptions::default(),
            tol: 1e-6,
            eta_initial: 0.1,
            eta_min: 1e-5,
            eta_max: 10.0,
            max_iter: 60,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Calibration {
    pub zeta: f64,
    pub eta_star: f64,
    /// `λ = 2η*ζ`
    pub lambda: f64,
    pub kappa: f64,
    pub solution: Solution,
}

struct Point {
    log_eta: f64,
    f: f64,
    mp: ModelParams,
    x: Vec<f64>,
    solution: Solution,
}

/// Finds the prior strength `η*` at which the predicted slope is `κ = 1`.
///
/// `κ` decreases with `η`; the root is bracketed by doubling or halving from
/// `opts.eta_initial` and then refined by Illinois false position in `ln η`.
/// Every inner solve is warm-started from the previous one.
pub fn calibrate_eta(
    zeta: f64,
    s: f64,
    spectrum: &Spectrum,
    opts: &CalibrateOptions,
) -> Result<Calibration> {
    verify_penalty_equivalence()?;
    if !(zeta >= 0.05) {
        return Err(Error::Parameter(format!(
            "calibration requires zeta >= 0.05, got {zeta}"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Parameter(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let mp0 = ModelParams::new(zeta, opts.eta_initial, s, spectrum.clone())?;
    let sol0 = rs_solve(&mp0, None, &opts.solve)?;
    let point = |mp: ModelParams, x: Vec<f64>, solution: Solution| Point {
        log_eta: mp.eta.ln(),
        f: solution.params.kappa - 1.0,
        mp,
        x,
        solution,
    };
    let eval = |from: &Point, eta: f64| -> Result<Point> {
        let mp = from.mp.with_eta(eta);
        let (x, out) = track(&from.mp, &from.x, &mp, &opts.solve)?;
        let p = Primary::from_coords(&x);
        let solution = Solution {
            params: OrderParams::from_primary(p, &mp),
            residual_norm: out.residual,
            converged: out.converged,
            asymptotic: false,
            iterations: out.iterations,
        };
        Ok(point(mp, x, solution))
    };
    let x0 = sol0.params.primary().to_coords().to_vec();
    let first = point(mp0, x0, sol0);
    let done = |p: Point| Calibration {
        zeta,
        eta_star: p.mp.eta,
        lambda: external_penalty_lambda(p.mp.eta, zeta),
        kappa: p.solution.params.kappa,
        solution: p.solution,
    };
    if first.f.abs() < opts.tol {
        return Ok(done(first));
    }

    // Bracket: `lo` has κ > 1 (smaller η), `hi` has κ < 1.
    let factor: f64 = if first.f > 0.0 { 2.0 } else { 0.5 };
    let mut inner = first;
    let outer = loop {
        let eta = inner.mp.eta * factor;
        if eta > opts.eta_max || eta < opts.eta_min {
            let k = inner.solution.params.kappa;
            return Err(Error::Calibration {
                message: format!(
                    "kappa = 1 not bracketed within eta in [{}, {}]",
                    opts.eta_min, opts.eta_max
                ),
                kappa_low: if factor > 1.0 { f64::NAN } else { k },
                kappa_high: if factor > 1.0 { k } else { f64::NAN },
            });
        }
        let next = eval(&inner, eta)?;
        if next.f.abs() < opts.tol {
            return Ok(done(next));
        }
        if (next.f > 0.0) != (inner.f > 0.0) {
            break next;
        }
        inner = next;
    };
    let (mut lo, mut hi) = if inner.f > 0.0 {
        (inner, outer)
    } else {
        (outer, inner)
    };

    // Illinois: halve the stale endpoint's value when one side repeats.
    let mut last_side = 0i8;
    for _ in 0..opts.max_iter {
        let t = lo.f / (lo.f - hi.f);
        let log_eta = lo.log_eta + t * (hi.log_eta - lo.log_eta);
        let from = if t < 0.5 { &lo } else { &hi };
        let next = eval(from, log_eta.exp())?;
        if next.f.abs() < opts.tol || (hi.log_eta - lo.log_eta).abs() < 1e-14 {
            return Ok(done(next));
        }
        if next.f > 0.0 {
            lo = next;
            if last_side == 1 {
                hi.f *= 0.5;
            }
            last_side = 1;
        } else {
            hi = next;
            if last_side == -1 {
                lo.f *= 0.5;
            }
            last_side = -1;
        }
    }
    Err(Error::Calibration {
        message: format!(
            "no convergence to |kappa - 1| < {} in {} iterations",
            opts.tol, opts.max_iter
        ),
        kappa_low: lo.solution.params.kappa,
        kappa_high: hi.solution.params.kappa,
    })
}
