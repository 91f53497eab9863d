//! Explicit constants of the power- and log-Harnack inequalities.

use crate::error::{Error, Result};

/// `beta = delta (1/T + kappa ||K||^2_{L^q([0,T])})`.
pub fn beta_constant(horizon: f64, k_lq_norm: f64, delta: f64, kappa: f64) -> Result<f64> {
    if !(horizon > 0.0) || !(delta > 0.0) || !(kappa > 0.0) || !(k_lq_norm >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta needs T, delta, kappa > 0 and ||K|| >= 0; got T={horizon}, ||K||={k_lq_norm}, delta={delta}, kappa={kappa}"
        )));
    }
    Ok(delta * (1.0 / horizon + kappa * k_lq_norm * k_lq_norm))
}

/// Sup-norm replacement for `beta` when `|b(x) - b(y)| <= L |x - y|`.
///
/// Along the Harnack bridge `|X_t - Y_t| = (1 - t/T)|x - y|`, so
/// `int_0^T |b(X) - b(Y)|^2 <= L^2 T |x - y|^2 / 3` holds pathwise and the
/// Krylov step is not needed.
pub fn beta_lipschitz(horizon: f64, lipschitz: f64, delta: f64) -> Result<f64> {
    if !(horizon > 0.0) || !(delta > 0.0) || !(lipschitz >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta needs T, delta > 0 and L >= 0; got T={horizon}, L={lipschitz}, delta={delta}"
        )));
    }
    Ok(delta * (1.0 / horizon + lipschitz * lipschitz * horizon / 3.0))
}

/// `(2p + 2) beta / (p - 1)^2`; the displacement must satisfy
/// `|x - y|^2 < 1 / this`.
pub fn smallness_coefficient(p: f64, beta: f64) -> f64 {
    (2.0 * p + 2.0) * beta / ((p - 1.0) * (p - 1.0))
}

/// Admissibility of a displacement and the threshold on `|x - y|^2`.
pub fn harnack_admissible(x: &[f64], y: &[f64], p: f64, beta: f64) -> Result<(bool, f64)> {
    check_p(p)?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let dist_sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let threshold = 1.0 / smallness_coefficient(p, beta);
    Ok((dist_sq < threshold, threshold))
}

/// `(1 - (2p+2) beta r^2 / (p-1)^2)^{-(p-1)/2}` for displacement norm `r`;
/// `+inf` at or beyond the threshold.
pub fn harnack_factor(p: f64, beta: f64, displacement: f64) -> Result<f64> {
    check_p(p)?;
    let s = 1.0 - smallness_coefficient(p, beta) * displacement * displacement;
    if s <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(s.powf(-(p - 1.0) / 2.0))
}

/// `1 / (1 - (2p+2) beta r^2 / (p-1)^2)`, the bound on `(E R^{p/(p-1)})^2`.
pub fn weight_moment_rhs(p: f64, beta: f64, displacement: f64) -> Result<f64> {
    check_p(p)?;
    let s = 1.0 - smallness_coefficient(p, beta) * displacement * displacement;
    if s <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / s)
}

/// `delta (|y|^2 / T + 4 kappa ||b||^2_{L^q_p(T)})`.
pub fn shift_log_constant_i(delta: f64, y_norm: f64, horizon: f64, kappa: f64, b_norm: f64) -> f64 {
    delta * (y_norm * y_norm / horizon + 4.0 * kappa * b_norm * b_norm)
}

/// `beta |y|^2`.
pub fn shift_log_constant_ii(beta: f64, y_norm: f64) -> f64 {
    beta * y_norm * y_norm
}

/// `log` of the exponential part `delta (p+1) |y|^2 / (2 (p-1) T)` of the
/// variant (i) power factor.
pub fn shift_power_exponent_i(p: f64, delta: f64, y_norm: f64, horizon: f64) -> f64 {
    delta * (p + 1.0) * y_norm * y_norm / (2.0 * (p - 1.0) * horizon)
}

/// `lambda = (p+1) delta / (p-1)^2` for the variant (i) exponential moment.
pub fn shift_lambda(p: f64, delta: f64) -> f64 {
    (p + 1.0) * delta / ((p - 1.0) * (p - 1.0))
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("power needs p > 1, got {p}")));
    }
    Ok(())
}
