use super::{ModelParams, OrderParams};
use crate::error::{Error, Result};
use crate::EULER_GAMMA;

/// Asymptotic overfitting measure
///
/// `E = ηζ[w²⟨a⟩⟨a²/(2η+g̃a)⟩⁻²⟨a²/(2η+g̃a)²⟩ − f̃⟨a/(2η+g̃a)²⟩]
///      − ln k − ln ρ + (ρ−1)C_E − ζηS²`.
///
/// Zero means perfect recovery; negative values signal overfitting.
pub fn overfit_measure(op: &OrderParams, mp: &ModelParams) -> Result<f64> {
    let k = op.q * (-op.u2()).exp() / op.u2();
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidSolution(format!(
            "k must be positive, got {k}"
        )));
    }
    if !(op.rho > 0.0) {
        return Err(Error::InvalidSolution(format!(
            "rho must be positive, got {}",
            op.rho
        )));
    }
    let (eta, zeta) = (mp.eta, mp.zeta);
    let sp = &mp.spectrum;
    let m21 = sp.moment(2, 1, eta, op.g_tilde)?;
    let m22 = sp.moment(2, 2, eta, op.g_tilde)?;
    let m12 = sp.moment(1, 2, eta, op.g_tilde)?;
    let bracket = op.w * op.w * sp.mean() * m22 / (m21 * m21) - op.f_tilde * m12;
    Ok(
        eta * zeta * bracket - k.ln() - op.rho.ln() + (op.rho - 1.0) * EULER_GAMMA
            - zeta * eta * mp.s * mp.s,
    )
}
