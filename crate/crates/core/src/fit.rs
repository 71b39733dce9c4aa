//! Ridge-penalized Cox regression in theory units.
//!
//! With `X = Z/√p` and `rᵢ = (Xb)ᵢ` the fitter minimizes
//!
//! `F(b) = −(1/N) Σᵢ [rᵢ − log Σ_{j: tⱼ ≥ tᵢ} e^{rⱼ}] + (η/N)‖b‖²`,
//!
//! the negative log posterior per sample under the prior `exp(−η‖b‖²)`.
//! Ties use Breslow's convention.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Cohort;

/// Right-continuous step function through `(time, value)` pairs, zero before
/// the first time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub points: Vec<(f64, f64)>,
}

impl StepFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self.points.partition_point(|(ti, _)| *ti <= t) {
            0 => 0.0,
            k => self.points[k - 1].1,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Stop when the gradient ∞-norm drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Maximum number of step halvings per iteration.
    pub max_halvings: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-9,
            max_iter: 100,
            max_halvings: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub b_hat: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Objective after each accepted iterate, starting from the initial point.
    pub objective_trace: Vec<f64>,
    pub lambda_hat: StepFunction,
}

/// Value, gradient and Hessian of `F`.
#[derive(Debug, Clone)]
pub struct Objective {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// Subjects grouped by distinct event time, in ascending time order.
#[derive(Debug, Clone)]
struct RiskSets {
    order: Vec<usize>,
    /// `groups[g]..groups[g + 1]` indexes `order` for the g-th distinct time.
    groups: Vec<usize>,
}

impl RiskSets {
    fn new(times: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let mut groups = vec![0];
        for k in 1..order.len() {
            if times[order[k]] != times[order[k - 1]] {
                groups.push(k);
            }
        }
        groups.push(order.len());
        RiskSets { order, groups }
    }

    fn num_groups(&self) -> usize {
        self.groups.len() - 1
    }

    fn group(&self, g: usize) -> &[usize] {
        &self.order[self.groups[g]..self.groups[g + 1]]
    }
}

/// Risk-set sums at shifted scale: `e^{r − m}`, and `S0` per distinct time.
struct Sums {
    shift: f64,
    exp_r: Vec<f64>,
    /// `Σ_{j ∈ R_g} e^{r_j − m}` for each time group `g`.
    s0: Vec<f64>,
}

fn risk_sums(r: &[f64], sets: &RiskSets) -> Sums {
    let shift = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp_r: Vec<f64> = r.iter().map(|v| (v - shift).exp()).collect();
    let ng = sets.num_groups();
    let mut s0 = vec![0.0; ng];
    let mut acc = 0.0;
    for g in (0..ng).rev() {
        acc += sets.group(g).iter().map(|&i| exp_r[i]).sum::<f64>();
        s0[g] = acc;
    }
    Sums { shift, exp_r, s0 }
}

fn theory_design(cohort: &Cohort) -> DMatrix<f64> {
    &cohort.z / (cohort.p() as f64).sqrt()
}

fn check_inputs(b: &[f64], cohort: &Cohort, eta: f64) -> Result<()> {
    if b.len() != cohort.p() {
        return Err(Error::Parameter(format!(
            "coefficient vector has length {} but the cohort has p = {}",
            b.len(),
            cohort.p()
        )));
    }
    if cohort.times.len() != cohort.n() {
        return Err(Error::Parameter(
            "cohort times and covariate rows differ in length".into(),
        ));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Parameter(format!(
            "eta must be nonnegative, got {eta}"
        )));
    }
    Ok(())
}

fn value_from(r: &[f64], b: &[f64], sets: &RiskSets, eta: f64) -> f64 {
    let n = r.len() as f64;
    let sums = risk_sums(r, sets);
    let mut total = 0.0;
    for g in 0..sets.num_groups() {
        let log_s0 = sums.s0[g].ln() + sums.shift;
        for &i in sets.group(g) {
            total += r[i] - log_s0;
        }
    }
    -total / n + eta / n * b.iter().map(|v| v * v).sum::<f64>()
}

struct Workspace {
    x: DMatrix<f64>,
    sets: RiskSets,
}

impl Workspace {
    fn new(cohort: &Cohort) -> Self {
        Workspace {
            x: theory_design(cohort),
            sets: RiskSets::new(&cohort.times),
        }
    }

    fn scores(&self, b: &DVector<f64>) -> Vec<f64> {
        (&self.x * b).iter().copied().collect()
    }

    fn value(&self, b: &DVector<f64>, eta: f64) -> f64 {
        value_from(&self.scores(b), b.as_slice(), &self.sets, eta)
    }

    fn full(&self, b: &DVector<f64>, eta: f64) -> Objective {
        let x = &self.x;
        let (n, p) = x.shape();
        let nf = n as f64;
        let r = self.scores(b);
        let sums = risk_sums(&r, &self.sets);
        let sets = &self.sets;
        let ng = sets.num_groups();

        // Breslow increments d_g/S0_g, their running sums H, and risk-set
        // means m_g = S1_g/S0_g via suffix sums of e^{r}x.
        let mut cum_h = vec![0.0; n];
        let mut acc = 0.0;
        for g in 0..ng {
            acc += sets.group(g).len() as f64 / sums.s0[g];
            for &i in sets.group(g) {
                cum_h[i] = acc;
            }
        }
        let mut means = DMatrix::<f64>::zeros(n, p);
        let mut s1 = DVector::<f64>::zeros(p);
        for g in (0..ng).rev() {
            for &i in sets.group(g) {
                s1.axpy(sums.exp_r[i], &x.row(i).transpose(), 1.0);
            }
            let inv = 1.0 / sums.s0[g];
            for &i in sets.group(g) {
                for (k, v) in s1.iter().enumerate() {
                    means[(i, k)] = v * inv;
                }
            }
        }

        let weights = DVector::from_iterator(n, (0..n).map(|i| sums.exp_r[i] * cum_h[i]));
        let col_sums = DVector::from_iterator(p, x.column_iter().map(|c| c.sum()));
        let mut gradient = x.tr_mul(&weights);
        gradient -= col_sums;
        gradient /= nf;
        gradient.axpy(2.0 * eta / nf, b, 1.0);

        let mut weighted = x.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= weights[i];
        }
        // Explicit transposes route both products through the blocked kernel.
        let mut hessian = DMatrix::<f64>::zeros(p, p);
        hessian.gemm(1.0 / nf, &weighted.transpose(), x, 0.0);
        hessian.gemm(-1.0 / nf, &means.transpose(), &means, 1.0);
        for k in 0..p {
            hessian[(k, k)] += 2.0 * eta / nf;
        }
        // Symmetrize away rounding asymmetry.
        let hessian = (&hessian + hessian.transpose()) * 0.5;

        let mut total = 0.0;
        for g in 0..ng {
            let log_s0 = sums.s0[g].ln() + sums.shift;
            for &i in sets.group(g) {
                total += r[i] - log_s0;
            }
        }
        let value = -total / nf + eta / nf * b.norm_squared();
        Objective {
            value,
            gradient,
            hessian,
        }
    }
}

/// Value, exact gradient and exact Hessian of the penalized objective at `b`.
pub fn penalized_objective(b: &[f64], cohort: &Cohort, eta: f64) -> Result<Objective> {
    check_inputs(b, cohort, eta)?;
    Ok(Workspace::new(cohort).full(&DVector::from_column_slice(b), eta))
}

/// Objective value only, in `O(Np)`.
pub fn penalized_value(b: &[f64], cohort: &Cohort, eta: f64) -> Result<f64> {
    check_inputs(b, cohort, eta)?;
    Ok(Workspace::new(cohort).value(&DVector::from_column_slice(b), eta))
}

/// Breslow estimate `Λ̂(t) = Σ_{tᵢ ≤ t} 1/Σ_{tⱼ ≥ tᵢ} e^{r̂ⱼ}`, one step per
/// distinct event time.
pub fn breslow_baseline(b_hat: &[f64], cohort: &Cohort) -> Result<StepFunction> {
    check_inputs(b_hat, cohort, 0.0)?;
    let r = cohort.risk_scores(b_hat);
    let sets = RiskSets::new(&cohort.times);
    let sums = risk_sums(&r, &sets);
    let mut acc = 0.0;
    let mut points = Vec::with_capacity(sets.num_groups());
    for g in 0..sets.num_groups() {
        let group = sets.group(g);
        acc += group.len() as f64 / sums.s0[g] * (-sums.shift).exp();
        points.push((cohort.times[group[0]], acc));
    }
    Ok(StepFunction { points })
}

/// Minimizes the penalized objective from `b = 0`.
pub fn fit_ridge_cox(cohort: &Cohort, eta: f64, opts: &FitOptions) -> Result<FitResult> {
    fit_ridge_cox_from(cohort, eta, &vec![0.0; cohort.p()], opts)
}

/// Minimizes the penalized objective by Newton's method with Cholesky solves
/// and step halving, starting from `init`.
pub fn fit_ridge_cox_from(
    cohort: &Cohort,
    eta: f64,
    init: &[f64],
    opts: &FitOptions,
) -> Result<FitResult> {
    check_inputs(init, cohort, eta)?;
    if eta == 0.0 && cohort.p() >= cohort.n() {
        return Err(Error::Parameter(format!(
            "unpenalized fit needs p < N, got p = {}, N = {}",
            cohort.p(),
            cohort.n()
        )));
    }
    let ws = Workspace::new(cohort);
    let mut b = DVector::from_column_slice(init);
    let mut obj = ws.full(&b, eta);
    let mut trace = vec![obj.value];
    let mut iterations = 0;
    let mut grad_norm = obj.gradient.amax();

    while grad_norm >= opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::Convergence {
                what: "penalized Cox Newton iteration",
                iterations,
                residual: grad_norm,
            });
        }
        iterations += 1;
        let chol = Cholesky::new(obj.hessian.clone()).ok_or(Error::RankDeficient)?;
        let step = chol.solve(&(-&obj.gradient));

        let slack = 1e-13 * obj.value.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = &b + &step * t;
            let value = ws.value(&trial, eta);
            if value.is_finite() && value <= obj.value + slack {
                accepted = Some(trial);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            return Err(Error::Convergence {
                what: "penalized Cox line search",
                iterations,
                residual: grad_norm,
            });
        };
        b = next;
        obj = ws.full(&b, eta);
        trace.push(obj.value);
        grad_norm = obj.gradient.amax();
    }

    let b_hat: Vec<f64> = b.iter().copied().collect();
    let lambda_hat = breslow_baseline(&b_hat, cohort)?;
    Ok(FitResult {
        b_hat,
        objective: obj.value,
        grad_norm,
        iterations,
        objective_trace: trace,
        lambda_hat,
    })
}
