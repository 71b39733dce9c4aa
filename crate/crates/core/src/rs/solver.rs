use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::equations::{fixed_point_sweep, residuals_primary};
use super::newton::{newton, NewtonOptions, NewtonOutcome};
use super::{ModelParams, OrderParams, Primary, Solution};
use crate::error::{Error, Result};
use crate::special::Quadrature;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOptions {
    pub newton: NewtonOptions,
    pub quad: Quadrature,
    /// Continuation starts from the small-ζ expansion at `min(ζ, start_zeta)`.
    pub start_zeta: f64,
    /// Largest ratio between consecutive continuation points.
    pub max_ratio: f64,
    /// Smallest continuation step (in path units) before giving up.
    pub min_path_step: f64,
    /// Below this ζ a failed solve falls back to the flagged small-ζ values.
    pub asymptotic_below: f64,
    /// Warm-start each sweep point from its predecessor. When false, sweep
    /// points are solved independently and in parallel.
    pub chain_sweep: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            newton: NewtonOptions::default(),
            quad: Quadrature::default(),
            start_zeta: 0.01,
            max_ratio: 1.5,
            min_path_step: 1e-4,
            asymptotic_below: 0.05,
            chain_sweep: true,
        }
    }
}

/// Leading-order small-ζ state: `ũ² = v² = ζ`, `w = S̃`, `g̃ = −f̃ = 1/ζ`,
/// `ρ = k = 1`.
pub fn small_zeta_init(mp: &ModelParams) -> OrderParams {
    let z = mp.zeta;
    let p = Primary {
        u2: z,
        v: z.sqrt(),
        w: mp.s_tilde(),
        f_tilde: -1.0 / z,
        g_tilde: 1.0 / z,
        q: z * z.exp(),
        rho: 1.0,
    };
    OrderParams::from_primary(p, mp)
}

pub(crate) fn newton_at(mp: &ModelParams, x0: &[f64], opts: &SolveOptions) -> NewtonOutcome {
    let quad = &opts.quad;
    let f = |x: &[f64]| residuals_primary(&Primary::from_coords(x), mp, quad).to_vec();
    let sweep = |x: &[f64]| {
        fixed_point_sweep(&Primary::from_coords(x), mp, quad)
            .to_coords()
            .to_vec()
    };
    newton(f, x0, &opts.newton, Some(&sweep))
}

fn finish(mp: &ModelParams, out: &NewtonOutcome) -> Result<Solution> {
    let p = Primary::from_coords(&out.x);
    if mp.eta == 0.0 && p.g_tilde < 1e-12 {
        return Err(Error::PhaseBoundary(format!(
            "g_tilde collapsed to {:.3e} at zeta = {} with eta = 0",
            p.g_tilde, mp.zeta
        )));
    }
    Ok(Solution {
        params: OrderParams::from_primary(p, mp),
        residual_norm: out.residual,
        converged: out.converged,
        asymptotic: false,
        iterations: out.iterations,
    })
}

fn check_phase(mp: &ModelParams) -> Result<()> {
    if mp.eta == 0.0 && mp.zeta >= 1.0 {
        return Err(Error::PhaseBoundary(format!(
            "maximum-likelihood regime (eta = 0) requires zeta < 1, got {}",
            mp.zeta
        )));
    }
    Ok(())
}

/// Follows a solution along a path parametrized by `s ∈ [0, 1]`, starting
/// from the converged point `x0` at `s = 0`. `solve(s, guess)` runs Newton at
/// path position `s`. Steps adapt: halved on failure, grown on success, and
/// never longer than `ds_cap`. A linear predictor extrapolates from the last
/// two accepted points.
pub(crate) fn continuation<F>(
    x0: &[f64],
    ds_cap: f64,
    min_step: f64,
    what: &'static str,
    solve: F,
) -> Result<(Vec<f64>, Option<NewtonOutcome>)>
where
    F: Fn(f64, &[f64]) -> NewtonOutcome,
{
    let mut ds = ds_cap;
    let mut s = 0.0;
    let mut x = x0.to_vec();
    let mut prev: Option<(f64, Vec<f64>)> = None;
    let mut last: Option<NewtonOutcome> = None;
    let mut last_residual = f64::NAN;
    let mut last_iterations = 0;

    while s < 1.0 {
        let s_try = (s + ds).min(1.0);
        let mut out = None;
        if let Some((sp, xp)) = &prev {
            let scale = (s_try - s) / (s - sp);
            let pred: Vec<f64> = x.iter().zip(xp).map(|(a, b)| a + (a - b) * scale).collect();
            let o = solve(s_try, &pred);
            if o.converged {
                out = Some(o);
            }
        }
        if out.is_none() {
            let o = solve(s_try, &x);
            last_residual = o.residual;
            last_iterations = o.iterations;
            if o.converged {
                out = Some(o);
            }
        }
        match out {
            Some(o) => {
                prev = Some((s, std::mem::replace(&mut x, o.x.clone())));
                s = s_try;
                last = Some(o);
                ds = (ds * 1.5).min(2.0 * ds_cap);
            }
            None => {
                ds *= 0.5;
                if ds < min_step {
                    return Err(Error::Convergence {
                        what,
                        iterations: last_iterations,
                        residual: last_residual,
                    });
                }
            }
        }
    }
    Ok((x, last))
}

/// Moves a converged solution at `from` to `to`: ζ (and η when both
/// endpoints are positive) interpolate geometrically, otherwise η linearly.
pub(crate) fn track(
    from: &ModelParams,
    x_from: &[f64],
    to: &ModelParams,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, NewtonOutcome)> {
    let geometric_eta = from.eta > 0.0 && to.eta > 0.0;
    let at = |s: f64| -> ModelParams {
        if s >= 1.0 {
            return to.clone();
        }
        let zeta = (from.zeta.ln() * (1.0 - s) + to.zeta.ln() * s).exp();
        let eta = if geometric_eta {
            (from.eta.ln() * (1.0 - s) + to.eta.ln() * s).exp()
        } else {
            from.eta * (1.0 - s) + to.eta * s
        };
        ModelParams {
            zeta,
            eta,
            ..to.clone()
        }
    };
    let mut span = (to.zeta / from.zeta).ln().abs();
    if geometric_eta {
        span = span.max((to.eta / from.eta).ln().abs());
    }
    let ds_cap = if span > 0.0 {
        (opts.max_ratio.ln() / span).min(1.0)
    } else {
        1.0
    };
    let (x, last) = continuation(
        x_from,
        ds_cap,
        opts.min_path_step,
        "RS continuation",
        |s, guess| newton_at(&at(s), guess, opts),
    )?;
    let out = last.unwrap_or_else(|| newton_at(to, &x, opts));
    Ok((x, out))
}

/// Solves the RS equations at `mp`.
///
/// With `init`, Newton starts there; otherwise (or if that fails) the
/// solution is continued from the small-ζ expansion.
pub fn rs_solve(
    mp: &ModelParams,
    init: Option<&OrderParams>,
    opts: &SolveOptions,
) -> Result<Solution> {
    check_phase(mp)?;
    if let Some(init) = init {
        let out = newton_at(mp, &init.primary().to_coords(), opts);
        if out.converged {
            return finish(mp, &out);
        }
    }
    let (_, out) = solve_from_scratch(mp, opts)?;
    finish(mp, &out)
}

pub(crate) fn solve_from_scratch(
    mp: &ModelParams,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, NewtonOutcome)> {
    check_phase(mp)?;
    let z0 = mp.zeta.min(opts.start_zeta);
    let start = mp.with_zeta(z0);
    let x0 = small_zeta_init(&start).primary().to_coords();
    let out = newton_at(&start, &x0, opts);
    if !out.converged {
        return Err(Error::Convergence {
            what: "RS solve from the small-zeta expansion",
            iterations: out.iterations,
            residual: out.residual,
        });
    }
    if z0 == mp.zeta {
        return Ok((out.x.clone(), out));
    }
    track(&start, &out.x, mp, opts)
}

/// Like [`rs_solve`] but, for `ζ` below `opts.asymptotic_below`, returns the
/// small-ζ expansion flagged as asymptotic when Newton fails.
pub fn rs_solve_or_asymptotic(mp: &ModelParams, opts: &SolveOptions) -> Result<Solution> {
    match rs_solve(mp, None, opts) {
        Ok(s) => Ok(s),
        Err(e) if mp.zeta < opts.asymptotic_below && !matches!(e, Error::PhaseBoundary(_)) => {
            let params = small_zeta_init(mp);
            let residual_norm = super::rs_residuals(&params, mp, &opts.quad)
                .map(|r| r.max_abs())
                .unwrap_or(f64::NAN);
            Ok(Solution {
                params,
                residual_norm,
                converged: false,
                asymptotic: true,
                iterations: 0,
            })
        }
        Err(e) => Err(e),
    }
}

/// One grid point of a sweep.
#[derive(Debug)]
pub struct SweepPoint {
    pub zeta: f64,
    pub result: Result<Solution>,
}

/// Solves along an increasing ζ grid, each point warm-started from the last
/// converged one (unless `opts.chain_sweep` is off).
pub fn rs_sweep(
    template: &ModelParams,
    zeta_grid: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<SweepPoint>> {
    if zeta_grid.iter().any(|&z| !(z > 0.0 && z.is_finite())) {
        return Err(Error::Parameter(
            "sweep grid must contain positive zeta values".into(),
        ));
    }
    if zeta_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter(
            "sweep grid must be strictly increasing".into(),
        ));
    }
    if !opts.chain_sweep {
        return Ok(zeta_grid
            .par_iter()
            .map(|&zeta| SweepPoint {
                zeta,
                result: rs_solve_or_asymptotic(&template.with_zeta(zeta), opts),
            })
            .collect());
    }

    let mut points = Vec::with_capacity(zeta_grid.len());
    let mut prev: Option<(ModelParams, Vec<f64>)> = None;
    for &zeta in zeta_grid {
        let mp = template.with_zeta(zeta);
        let tracked = match &prev {
            Some((pmp, px)) if check_phase(&mp).is_ok() => track(pmp, px, &mp, opts).ok(),
            _ => None,
        };
        let result = match tracked {
            Some((x, out)) => finish(&mp, &out).inspect(|_| prev = Some((mp.clone(), x))),
            None => rs_solve_or_asymptotic(&mp, opts).inspect(|s| {
                if !s.asymptotic {
                    prev = Some((mp.clone(), s.params.primary().to_coords().to_vec()));
                }
            }),
        };
        points.push(SweepPoint { zeta, result });
    }
    Ok(points)
}
