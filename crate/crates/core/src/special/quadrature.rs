//! Gaussian quadrature rules for the two integration measures of the theory:
//! the standard normal `Dz = (2π)^{-1/2} e^{-z²/2} dz` and the exponential
//! `e^{-x} dx` on `(0, ∞)`.
//!
//! Nodes and weights are generated on demand from the three-term recurrences;
//! nothing is tabulated.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_HERMITE_NODES: usize = 256;
/// Beyond this order the outermost Laguerre weights underflow `f64`.
pub const MAX_LAGUERRE_NODES: usize = 160;

const NEWTON_EPS: f64 = 1e-15;
const NEWTON_MAX: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    /// `∫ f(z) Dz` over the real line.
    GaussianMeasure,
    /// `∫₀^∞ e^{-x} f(x) dx`.
    ExponentialMeasure,
}

/// Nodes in strictly increasing order with strictly positive weights
/// normalized to the unit mass of the measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: MeasureKind,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    fn validate(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0 && w.is_finite())
            && self.nodes.windows(2).all(|p| p[0] < p[1])
    }

    fn normalized(mut self) -> Self {
        let total: f64 = self.weights.iter().sum();
        for w in &mut self.weights {
            *w /= total;
        }
        self
    }
}

fn check_order(n: usize, cap: usize) -> Result<()> {
    if n == 0 || n > cap {
        return Err(Error::Parameter(format!(
            "quadrature order must lie in 1..={cap}, got {n}"
        )));
    }
    Ok(())
}

/// Gauss–Hermite rule for the standard normal measure, exact for polynomials
/// of degree `2n − 1`.
pub fn gauss_hermite(n: usize) -> Result<QuadratureRule> {
    check_order(n, MAX_HERMITE_NODES)?;
    // Probabilists' Hermite: α_k = 0, β_k = k.
    let alpha = vec![0.0; n];
    let beta: Vec<f64> = (0..n)
        .map(|k| if k == 0 { 1.0 } else { k as f64 })
        .collect();
    let mut rule =
        gauss_from_recurrence(&alpha, &beta, MeasureKind::GaussianMeasure).ok_or_else(|| {
            Error::Parameter(format!("Gauss-Hermite construction failed at order {n}"))
        })?;
    // Exact symmetry.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        let w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = w;
        rule.weights[j] = w;
    }
    if n % 2 == 1 {
        rule.nodes[n / 2] = 0.0;
    }
    Ok(rule)
}

/// Gauss–Laguerre rule for `e^{-x} dx` on `(0, ∞)`, exact for polynomials of
/// degree `2n − 1`.
///
/// Converges only algebraically on integrands with `log x` or `x^ρ`
/// behaviour at the origin; see [`log_gauss_laguerre`] for those.
pub fn gauss_laguerre(n: usize) -> Result<QuadratureRule> {
    check_order(n, MAX_LAGUERRE_NODES)?;
    // Laguerre: α_k = 2k + 1, β_k = k².
    let alpha: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + 1.0).collect();
    let beta: Vec<f64> = (0..n)
        .map(|k| if k == 0 { 1.0 } else { (k * k) as f64 })
        .collect();
    gauss_from_recurrence(&alpha, &beta, MeasureKind::ExponentialMeasure)
        .ok_or_else(|| Error::Parameter(format!("Gauss-Laguerre construction failed at order {n}")))
}

/// Golub–Welsch start, Newton polish on the orthonormal recurrence,
/// Christoffel weights. `None` if the result violates the rule invariants.
fn gauss_from_recurrence(alpha: &[f64], beta: &[f64], kind: MeasureKind) -> Option<QuadratureRule> {
    let n = alpha.len();
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jacobi[(k, k)] = alpha[k];
        if k + 1 < n {
            let off = beta[k + 1].sqrt();
            jacobi[(k, k + 1)] = off;
            jacobi[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut t: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    t.sort_by(|a, b| a.total_cmp(b));

    let mut log_w = Vec::with_capacity(n);
    for ti in &mut t {
        for _ in 0..NEWTON_MAX {
            let (p, dp, _) = orthonormal_eval(alpha, beta, *ti);
            let step = p / dp;
            if !step.is_finite() {
                break;
            }
            *ti -= step;
            if step.abs() <= NEWTON_EPS * ti.abs().max(1.0) {
                break;
            }
        }
        let (_, _, log_sum_sq) = orthonormal_eval(alpha, beta, *ti);
        log_w.push(-log_sum_sq);
    }
    let rule = QuadratureRule {
        nodes: t,
        weights: log_w.iter().map(|l| l.exp()).collect(),
        kind,
    }
    .normalized();
    rule.validate().then_some(rule)
}

/// Gaussian rule for `e^{-x} dx` on `(0, ∞)` that is exact for polynomials
/// of degree `2n − 1` in `log x` rather than in `x`.
///
/// With `t = log x` the measure becomes `e^{t − e^t} dt` on the real line.
/// Its recurrence coefficients come from a discretized Stieltjes procedure,
/// the nodes from the Jacobi matrix refined by Newton on the orthonormal
/// recurrence, the weights from the Christoffel function. Integrands such as
/// `W(c·x^ρ)` and `log x` are analytic in `t`, so the rule converges
/// geometrically where plain Gauss–Laguerre stalls at `O(1/n)`.
pub fn log_gauss_laguerre(n: usize) -> Result<QuadratureRule> {
    check_order(n, MAX_LAGUERRE_NODES)?;
    let (alpha, beta) = gumbel_recurrence(n);
    let rule =
        gauss_from_recurrence(&alpha, &beta, MeasureKind::ExponentialMeasure).ok_or_else(|| {
            Error::Parameter(format!(
                "log-variable Laguerre construction failed at order {n}"
            ))
        })?;
    Ok(QuadratureRule {
        nodes: rule.nodes.iter().map(|v| v.exp()).collect(),
        ..rule
    })
}

/// Recurrence coefficients `(α_k, β_k)` of the monic orthogonal polynomials for
/// the weight `e^{t − e^t}`, with `β_0 = 1` (unit mass).
fn gumbel_recurrence(n: usize) -> (Vec<f64>, Vec<f64>) {
    const H: f64 = 0.01;
    let lo = -(6.0 * n as f64 + 40.0);
    let hi = 5.0;
    let m = ((hi - lo) / H) as usize + 1;
    let grid: Vec<f64> = (0..m).map(|i| lo + i as f64 * H).collect();
    let w: Vec<f64> = grid.iter().map(|&t| H * (t - t.exp()).exp()).collect();
    let mass: f64 = w.iter().sum();

    let mut alpha = vec![0.0_f64; n];
    let mut beta = vec![0.0_f64; n];
    beta[0] = 1.0;
    // Orthonormal Stieltjes: q_prev = π_{k−1}, q = π_k, both normalized.
    let mut q_prev = vec![0.0; m];
    let mut q = vec![1.0 / mass.sqrt(); m];
    for k in 0..n {
        alpha[k] = grid
            .iter()
            .zip(&w)
            .zip(&q)
            .map(|((&t, &wi), &qi)| wi * t * qi * qi)
            .sum();
        if k + 1 == n {
            break;
        }
        let sb = beta[k].sqrt();
        let mut next: Vec<f64> = (0..m)
            .map(|i| {
                let prev = if k == 0 { 0.0 } else { sb * q_prev[i] };
                (grid[i] - alpha[k]) * q[i] - prev
            })
            .collect();
        let norm2: f64 = next.iter().zip(&w).map(|(v, wi)| wi * v * v).sum();
        beta[k + 1] = norm2;
        let s = norm2.sqrt();
        for v in &mut next {
            *v /= s;
        }
        q_prev = std::mem::replace(&mut q, next);
    }
    (alpha, beta)
}

/// Evaluates the degree-`n` orthonormal polynomial, its derivative, and
/// `log Σ_{k<n} p_k(t)²` at `t`, with running rescaling against overflow.
fn orthonormal_eval(alpha: &[f64], beta: &[f64], t: f64) -> (f64, f64, f64) {
    let n = alpha.len();
    // p_0 = 1 (unit mass), p_{k+1} = ((t−α_k) p_k − √β_k p_{k−1}) / √β_{k+1}
    let (mut p_prev, mut p) = (0.0_f64, 1.0_f64);
    let (mut d_prev, mut d) = (0.0_f64, 0.0_f64);
    let mut sum_sq = 0.0_f64;
    let mut log_scale = 0.0_f64;
    for k in 0..n {
        sum_sq += p * p;
        let sb_k = if k == 0 { 0.0 } else { beta[k].sqrt() };
        let sb_next = if k + 1 < n { beta[k + 1].sqrt() } else { 1.0 };
        let p_next = ((t - alpha[k]) * p - sb_k * p_prev) / sb_next;
        let d_next = (p + (t - alpha[k]) * d - sb_k * d_prev) / sb_next;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
        let mag = p.abs().max(p_prev.abs());
        if mag > 1e100 {
            let s = 1e-100;
            p *= s;
            p_prev *= s;
            d *= s;
            d_prev *= s;
            sum_sq *= s * s;
            log_scale += 100.0 * std::f64::consts::LN_10;
        }
    }
    (p, d, sum_sq.ln() + 2.0 * log_scale)
}

/// The pair of rules the replica integrals are evaluated with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub gauss: QuadratureRule,
    pub exp: QuadratureRule,
}

impl Quadrature {
    pub const DEFAULT_HERMITE: usize = 40;
    pub const DEFAULT_LAGUERRE: usize = 80;

    pub fn with_orders(hermite: usize, laguerre: usize) -> Result<Self> {
        Ok(Quadrature {
            gauss: gauss_hermite(hermite)?,
            exp: log_gauss_laguerre(laguerre)?,
        })
    }

    /// Both orders doubled (capped), for refinement checks.
    pub fn refined(&self) -> Result<Self> {
        Self::with_orders(
            (2 * self.gauss.len()).min(MAX_HERMITE_NODES),
            (2 * self.exp.len()).min(MAX_LAGUERRE_NODES),
        )
    }
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::with_orders(Self::DEFAULT_HERMITE, Self::DEFAULT_LAGUERRE)
            .expect("default quadrature orders are valid")
    }
}
