use serde::{Deserialize, Serialize};

use super::{ModelParams, OrderParams, Primary};
use crate::error::{Error, Result};
use crate::special::{lambert_w0_exp, Quadrature};
use crate::EULER_GAMMA;

pub const NUM_EQUATIONS: usize = 7;

/// Residuals of the seven saddle-point equations, each scaled to be O(1)
/// across the whole ζ range:
///
/// 1. `ζf̃ + I₁/ũ⁴`, with `I₁ = ⟨⟨(W − ũ²)²⟩⟩`
/// 2. `ζg̃ − I₂/ũ²`, with `I₂ = ⟨⟨W/(1+W)⟩⟩`
/// 3. `w − g̃ρS⟨a⟩^{-1/2} ⟨a²/(2η+g̃a)⟩`
/// 4. `1 − ⟨a/(2η+g̃a)⟩/ũ²`
/// 5. `(v² − w²[⟨a⟩⟨a²/(2η+g̃a)⟩⁻²⟨a³/(2η+g̃a)²⟩ − 1] + f̃⟨a²/(2η+g̃a)²⟩)/ũ²`
/// 6. `1 − I₆/ũ²`, with `I₆ = ⟨⟨W⟩⟩`
/// 7. `1/ρ − [I₇ − ζg̃ũ²S̃(w − ρS̃)]/ũ² − C_E`, with `I₇ = ⟨⟨W log s⟩⟩`
///
/// where `W = W₀(q e^{σx} s^ρ)` and `⟨⟨·⟩⟩` integrates `x` against the
/// standard normal and `s` against `e^{-s}ds` on `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals(pub [f64; NUM_EQUATIONS]);

impl Residuals {
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, r| {
            if r.is_nan() {
                f64::INFINITY
            } else {
                m.max(r.abs())
            }
        })
    }
}

/// Double integrals over the Gaussian and exponential measures.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Integrals {
    /// `⟨⟨(W − c)²⟩⟩` for the centring constant `c` passed in.
    pub centred_sq: f64,
    /// `⟨⟨W/(1+W)⟩⟩`
    pub saturation: f64,
    /// `⟨⟨W⟩⟩`
    pub mean: f64,
    /// `⟨⟨W log s⟩⟩`
    pub log_moment: f64,
}

/// Evaluates the `W` integrals for `W = W₀(exp(log_q + σx + ρ log s))`.
pub(crate) fn integrals(
    log_q: f64,
    sigma: f64,
    rho: f64,
    centre: f64,
    quad: &Quadrature,
) -> Integrals {
    let mut acc = Integrals {
        centred_sq: 0.0,
        saturation: 0.0,
        mean: 0.0,
        log_moment: 0.0,
    };
    let gauss = &quad.gauss;
    let exp = &quad.exp;
    for (&s, &ws) in exp.nodes.iter().zip(&exp.weights) {
        let ls = s.ln();
        let base = log_q + rho * ls;
        let (mut sq, mut sat, mut mean) = (0.0, 0.0, 0.0);
        for (&x, &wx) in gauss.nodes.iter().zip(&gauss.weights) {
            let w = lambert_w0_exp(base + sigma * x);
            let d = w - centre;
            sq += wx * d * d;
            sat += wx * w / (1.0 + w);
            mean += wx * w;
        }
        acc.centred_sq += ws * sq;
        acc.saturation += ws * sat;
        acc.mean += ws * mean;
        acc.log_moment += ws * mean * ls;
    }
    acc
}

/// The four spectral averages the equations need, in the order
/// `⟨a/(2η+g̃a)⟩, ⟨a²/(2η+g̃a)⟩, ⟨a²/(2η+g̃a)²⟩, ⟨a³/(2η+g̃a)²⟩`.
pub(crate) fn spectral_terms(mp: &ModelParams, g_tilde: f64) -> [f64; 4] {
    let (eta, s) = (mp.eta, &mp.spectrum);
    [
        s.moment_unchecked(1, 1, eta, g_tilde),
        s.moment_unchecked(2, 1, eta, g_tilde),
        s.moment_unchecked(2, 2, eta, g_tilde),
        s.moment_unchecked(3, 2, eta, g_tilde),
    ]
}

pub(crate) fn residuals_primary(p: &Primary, mp: &ModelParams, quad: &Quadrature) -> [f64; 7] {
    let zeta = mp.zeta;
    let mean_a = mp.spectrum.mean();
    let s_tilde = mp.s * mean_a.sqrt();
    let sigma = p.sigma(s_tilde);
    let int = integrals(p.q.ln(), sigma, p.rho, p.u2, quad);
    let [m11, m21, m22, m32] = spectral_terms(mp, p.g_tilde);
    let u2 = p.u2;
    let v5_rhs = p.w * p.w * (mean_a * m32 / (m21 * m21) - 1.0) - p.f_tilde * m22;
    [
        zeta * p.f_tilde + int.centred_sq / (u2 * u2),
        zeta * p.g_tilde - int.saturation / u2,
        p.w - p.g_tilde * p.rho * mp.s / mean_a.sqrt() * m21,
        1.0 - m11 / u2,
        (p.v * p.v - v5_rhs) / u2,
        1.0 - int.mean / u2,
        1.0 / p.rho
            - (int.log_moment - zeta * p.g_tilde * u2 * s_tilde * (p.w - p.rho * s_tilde)) / u2
            - EULER_GAMMA,
    ]
}

/// Evaluates the seven residuals at `op`.
pub fn rs_residuals(op: &OrderParams, mp: &ModelParams, quad: &Quadrature) -> Result<Residuals> {
    if !(op.u_tilde > 0.0 && op.g_tilde >= 0.0 && op.q > 0.0 && op.rho > 0.0 && op.f_tilde <= 0.0) {
        return Err(Error::InvalidSolution(format!(
            "order parameters violate sign constraints: {op:?}"
        )));
    }
    // Surfaces the singular-moment error for η = g̃ = 0.
    mp.spectrum.moment(1, 1, mp.eta, op.g_tilde)?;
    Ok(Residuals(residuals_primary(&op.primary(), mp, quad)))
}

/// One Gauss–Seidel pass through the equations in dependency order
/// 4 → 3 → 6 → 2 → 1 → 5 → 7, each solved for "its" unknown.
pub(crate) fn fixed_point_sweep(p: &Primary, mp: &ModelParams, quad: &Quadrature) -> Primary {
    let mut p = *p;
    let zeta = mp.zeta;
    let mean_a = mp.spectrum.mean();
    let s_tilde = mp.s * mean_a.sqrt();
    let [m11, m21, _, _] = spectral_terms(mp, p.g_tilde);
    p.u2 = m11;
    p.w = p.g_tilde * p.rho * mp.s / mean_a.sqrt() * m21;

    let int = integrals(p.q.ln(), p.sigma(s_tilde), p.rho, p.u2, quad);
    // d⟨⟨W⟩⟩/d log q = ⟨⟨W/(1+W)⟩⟩
    let step = ((p.u2 - int.mean) / int.saturation).clamp(-2.0, 2.0);
    p.q *= step.exp();

    let int = integrals(p.q.ln(), p.sigma(s_tilde), p.rho, p.u2, quad);
    p.g_tilde = int.saturation / (zeta * p.u2);
    p.f_tilde = -int.centred_sq / (zeta * p.u2 * p.u2);

    let [_, m21, m22, m32] = spectral_terms(mp, p.g_tilde);
    let v2 = p.w * p.w * (mean_a * m32 / (m21 * m21) - 1.0) - p.f_tilde * m22;
    p.v = v2.max(1e-300).sqrt();

    let int = integrals(p.q.ln(), p.sigma(s_tilde), p.rho, p.u2, quad);
    let denom = int.log_moment - zeta * p.g_tilde * p.u2 * s_tilde * (p.w - p.rho * s_tilde)
        + p.u2 * EULER_GAMMA;
    if denom > 0.0 {
        p.rho = p.u2 / denom;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rs::small_zeta_init;
    use crate::spectrum::Spectrum;

    fn quad() -> Quadrature {
        Quadrature::default()
    }

    #[test]
    fn ml_reduction_point_zeroes_equations_three_to_five() {
        let q = quad();
        for spectrum in [
            Spectrum::identity(),
            Spectrum::from_atoms(vec![(0.4, 0.3), (1.7, 0.7)]).unwrap(),
        ] {
            let mp = ModelParams::new(0.4, 0.0, 1.3, spectrum).unwrap();
            let (u2, v, rho) = (0.9, 0.8, 1.2);
            let p = Primary {
                u2,
                v,
                w: rho * mp.s_tilde(),
                f_tilde: -v * v / (u2 * u2),
                g_tilde: 1.0 / u2,
                q: 1.7,
                rho,
            };
            let r = residuals_primary(&p, &mp, &q);
            for (i, ri) in r.iter().enumerate().take(5).skip(2) {
                assert!(ri.abs() < 1e-14, "equation {} residual {ri}", i + 1);
            }
        }
    }

    #[test]
    fn small_zeta_init_is_nearly_a_solution() {
        let mp = ModelParams::new(1e-4, 0.025, 1.0, Spectrum::identity()).unwrap();
        let init = small_zeta_init(&mp);
        let r = rs_residuals(&init, &mp, &quad()).unwrap();
        assert!(r.max_abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn integrals_match_closed_forms_for_small_arguments() {
        // For q → 0, W(z) ≈ z and ⟨⟨q e^{σx} s^ρ⟩⟩ = q e^{σ²/2} Γ(1+ρ).
        let q = quad();
        let (lq, sigma, rho) = ((1e-9f64).ln(), 0.7, 1.0);
        let int = integrals(lq, sigma, rho, 0.0, &q);
        let expected = 1e-9 * (0.5 * sigma * sigma).exp();
        assert!((int.mean / expected - 1.0).abs() < 1e-8);
        // ⟨⟨s log s⟩⟩ = Γ'(2) = 1 − γ
        let expected_log = expected * (1.0 - EULER_GAMMA);
        assert!((int.log_moment / expected_log - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sign_constraint_violations_are_rejected() {
        let mp = ModelParams::new(0.5, 0.1, 1.0, Spectrum::identity()).unwrap();
        let mut op = small_zeta_init(&mp);
        op.f_tilde = 1.0;
        assert!(rs_residuals(&op, &mp, &quad()).is_err());
        let mp0 = ModelParams::new(0.5, 0.0, 1.0, Spectrum::identity()).unwrap();
        let mut op = small_zeta_init(&mp0);
        op.g_tilde = 0.0;
        assert!(matches!(
            rs_residuals(&op, &mp0, &quad()),
            Err(Error::SingularMoment { .. })
        ));
    }
}
