//! Principal branch of the Lambert W function on the nonnegative reals.

use crate::error::{Error, Result};

const MAX_ITER: usize = 50;

/// `W₀(x)` for `x ≥ 0`: the unique `w ≥ 0` with `w·eʷ = x`.
///
/// Series start for small arguments, `log − log log` start for large ones,
/// then Halley iteration. `W₀(0) = 0` exactly.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!(
            "Lambert W0 requires a nonnegative argument, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if x > 1e300 {
        // w·eʷ would overflow inside the iteration; go through the log form.
        return Ok(w_of_log(x.ln()));
    }
    Ok(halley(x, initial_guess(x)))
}

/// `W₀(eʸ)` for any real `y`, without forming `eʸ` when it would overflow.
///
/// The replica integrands are all of the form `W(exp(log q + σx + ρ log s))`,
/// so this is the entry point the solver uses.
#[inline]
pub fn lambert_w0_exp(y: f64) -> f64 {
    if y < -40.0 {
        let x = y.exp();
        return x - x * x;
    }
    if y <= 1.0 {
        let x = y.exp();
        return halley(x, initial_guess(x));
    }
    w_of_log(y)
}

fn initial_guess(x: f64) -> f64 {
    if x < 0.25 {
        // W(x) = x − x² + 3x³/2 − 8x⁴/3 + …
        x * (1.0 + x * (-1.0 + x * (1.5 - x * 8.0 / 3.0)))
    } else if x < 8.0 {
        // Winitzki's uniform approximation.
        let l = x.ln_1p();
        l * (1.0 - l.ln_1p() / (2.0 + l))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

fn halley(x: f64, mut w: f64) -> f64 {
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs() {
            break;
        }
    }
    w
}

/// Solves `w + ln w = y` for `y > 1` (so `w > 1`).
fn w_of_log(y: f64) -> f64 {
    let ly = y.ln();
    let mut w = if y > 3.0 {
        y - ly + ly / y
    } else {
        0.5 * y + 0.2
    };
    for _ in 0..MAX_ITER {
        let f = w + w.ln() - y;
        let d1 = 1.0 + 1.0 / w;
        let d2 = -1.0 / (w * w);
        let step = f / (d1 - 0.5 * f * d2 / d1);
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect_w(x: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, x.max(1.0));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn trivial_values() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn omega_constant_matches_bisection() {
        let w = lambert_w0(1.0).unwrap();
        let oracle = bisect_w(1.0);
        assert!((w - oracle).abs() < 1e-12);
        assert!((w - 0.567_143_290_4).abs() < 1e-10);
    }

    #[test]
    fn negative_argument_is_domain_error() {
        assert!(matches!(lambert_w0(-1e-3), Err(Error::Domain(_))));
        assert!(lambert_w0(f64::NAN).is_err());
    }

    #[test]
    fn self_consistency_on_log_grid() {
        for i in 0..=480 {
            let x = 10f64.powf(-12.0 + 24.0 * i as f64 / 480.0);
            let w = lambert_w0(x).unwrap();
            let err = (w * w.exp() - x).abs();
            assert!(err <= 1e-12 * x.max(1.0), "x={x} w={w} err={err}");
        }
    }

    #[test]
    fn exp_form_agrees_with_direct_form() {
        for i in 0..=400 {
            let y = -60.0 + 120.0 * i as f64 / 400.0;
            let a = lambert_w0_exp(y);
            let b = lambert_w0(y.exp()).unwrap();
            assert!((a - b).abs() <= 1e-14 * b.max(1e-300) + 1e-300, "y={y}");
        }
        // Far beyond the overflow threshold of exp.
        let w = lambert_w0_exp(2000.0);
        assert!((w + w.ln() - 2000.0).abs() < 1e-12);
    }
}
