use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Damped Newton with a forward-difference Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Target residual ∞-norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Smallest damping factor tried before declaring a stall.
    pub min_damping: f64,
    /// Fixed-point sweeps attempted when Newton stalls.
    pub fallback_sweeps: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 200,
            fd_step: 1e-6,
            min_damping: 1e-4,
            fallback_sweeps: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn norm_inf(r: &[f64]) -> f64 {
    r.iter().fold(0.0_f64, |m, v| {
        if v.is_finite() {
            m.max(v.abs())
        } else {
            f64::INFINITY
        }
    })
}

/// Map from a state vector to a residual or an updated state.
pub(crate) type VectorMap<'a> = &'a dyn Fn(&[f64]) -> Vec<f64>;

pub(crate) fn newton<F>(
    f: F,
    x0: &[f64],
    opts: &NewtonOptions,
    fallback: Option<VectorMap>,
) -> NewtonOutcome
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = f(&x);
    let mut norm = norm_inf(&r);
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if norm < opts.tol {
            break;
        }
        iterations += 1;

        let mut jac = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let h = opts.fd_step * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += h;
            let rp = f(&xp);
            for i in 0..n {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let rhs = DVector::from_iterator(n, r.iter().map(|v| -v));
        let step = jac
            .lu()
            .solve(&rhs)
            .filter(|d| d.iter().all(|v| v.is_finite()));

        let mut accepted = false;
        if let Some(d) = step {
            let mut lambda = 1.0;
            while lambda >= opts.min_damping {
                let xn: Vec<f64> = x
                    .iter()
                    .zip(d.iter())
                    .map(|(a, b)| a + lambda * b)
                    .collect();
                let rn = f(&xn);
                let nn = norm_inf(&rn);
                if nn < norm {
                    x = xn;
                    r = rn;
                    norm = nn;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
        }
        if accepted {
            continue;
        }

        // Newton stalled: try fixed-point sweeps from the current point.
        let Some(sweep) = fallback else { break };
        let mut best = (x.clone(), r.clone(), norm);
        let mut xs = x.clone();
        for _ in 0..opts.fallback_sweeps {
            xs = sweep(&xs);
            let rs = f(&xs);
            let ns = norm_inf(&rs);
            if ns < best.2 {
                best = (xs.clone(), rs, ns);
            }
        }
        if best.2 < norm {
            (x, r, norm) = best;
        } else {
            break;
        }
    }

    NewtonOutcome {
        converged: norm < opts.tol,
        x,
        residual: norm,
        iterations,
    }
}
