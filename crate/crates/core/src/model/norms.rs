//! Mixed space-time Lebesgue norms and translation moduli of drifts.

use super::drift::{euclid, ramp, space_norm, DriftFamily, DriftSpec};
use super::quadrature::{adaptive_tensor, piecewise_simpson, QuadratureParams};
use crate::error::{Error, Result};

/// `||b||_{L^q_p(T)} = ( int_0^T ||b_t||_p^q dt )^{1/q}`.
pub fn lqp_norm(spec: &DriftSpec, horizon: f64, quad: &QuadratureParams) -> Result<f64> {
    lqp_norm_between(spec, 0.0, horizon, quad)
}

/// The same norm restricted to `[start, end]`.
pub fn lqp_norm_between(spec: &DriftSpec, start: f64, end: f64, quad: &QuadratureParams) -> Result<f64> {
    if !(end > start) || start < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "time interval must satisfy 0 <= start < end, got [{start}, {end}]"
        )));
    }
    let q = spec.q();
    if spec.is_time_homogeneous() {
        let n = space_norm(spec, start, quad)?;
        return Ok(n * (end - start).powf(1.0 / q));
    }
    let DriftFamily::Grid(g) = spec.family() else {
        unreachable!("only grid drifts vary in time")
    };
    let mut acc = 0.0;
    for (k, t0) in g.times.iter().enumerate() {
        let t1 = g.times.get(k + 1).copied().unwrap_or(f64::INFINITY);
        let len = t1.min(end) - t0.max(start);
        if len > 0.0 {
            acc += space_norm(spec, *t0, quad)?.powf(q) * len;
        }
    }
    Ok(acc.powf(1.0 / q))
}

/// `( int |b_t(x + y) - b_t(x)|^p dx )^{1/p}`.
pub fn translation_modulus(spec: &DriftSpec, t: f64, y: &[f64], quad: &QuadratureParams) -> Result<f64> {
    if y.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: y.len(),
        });
    }
    if y.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidArgument("displacement must be nonzero".into()));
    }
    let p = spec.p();
    match spec.family() {
        DriftFamily::Zero { .. } => Ok(0.0),
        DriftFamily::Lipschitz { matrix, .. } => {
            let moved = matrix
                .iter()
                .any(|row| row.iter().zip(y).map(|(a, v)| a * v).sum::<f64>() != 0.0);
            Ok(if moved { f64::INFINITY } else { 0.0 })
        }
        DriftFamily::IndicatorBox {
            amplitude,
            lower,
            upper,
        } => {
            let vol: f64 = lower.iter().zip(upper).map(|(l, u)| u - l).product();
            let overlap: f64 = lower
                .iter()
                .zip(upper)
                .zip(y)
                .map(|((l, u), s)| (u - l - s.abs()).max(0.0))
                .product();
            Ok(euclid(amplitude) * (2.0 * (vol - overlap)).powf(1.0 / p))
        }
        DriftFamily::MollifiedIndicator {
            amplitude,
            lower,
            upper,
            width,
        } if spec.dim() == 1 => {
            let (lo, hi, w, s) = (lower[0], upper[0], *width, y[0]);
            let mut breaks = Vec::with_capacity(8);
            for shift in [0.0, -s] {
                breaks.extend_from_slice(&[
                    lo - 0.5 * w + shift,
                    lo + 0.5 * w + shift,
                    hi - 0.5 * w + shift,
                    hi + 0.5 * w + shift,
                ]);
            }
            let v = piecewise_simpson(
                &|x| (ramp(x + s, lo, hi, w) - ramp(x, lo, hi, w)).abs().powf(p),
                &breaks,
                1e-13,
            );
            Ok(euclid(amplitude) * v.powf(1.0 / p))
        }
        _ => {
            let (lo, hi) = spec.support().expect("remaining families have compact support");
            let lo: Vec<f64> = lo.iter().zip(y).map(|(l, s)| l - s.abs()).collect();
            let hi: Vec<f64> = hi.iter().zip(y).map(|(h, s)| h + s.abs()).collect();
            let d = spec.dim();
            let integrand = |x: &[f64]| {
                let shifted: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
                let mut b1 = vec![0.0; d];
                let mut b0 = vec![0.0; d];
                spec.eval_into(t, &shifted, &mut b1);
                spec.eval_into(t, x, &mut b0);
                let diff: Vec<f64> = b1.iter().zip(&b0).map(|(a, b)| a - b).collect();
                euclid(&diff).powf(p)
            };
            Ok(adaptive_tensor(&integrand, &lo, &hi, quad)?.powf(1.0 / p))
        }
    }
}

/// `K(t)` with `||b_t(. + y) - b_t||_p <= K(t)|y|`, for families where it
/// is known in closed form.
pub fn modulus_at(spec: &DriftSpec, _t: f64) -> Option<f64> {
    spec.analytic_norms().and_then(|a| a.modulus)
}

/// Both forms in which the modulus enters the constants:
/// `||K||_{L^q([0,T])}` and `( int_0^T K^{2q} )^{1/q}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusNorms {
    pub lq: f64,
    pub squared_2q: f64,
}

pub fn modulus_norms(spec: &DriftSpec, horizon: f64) -> Option<ModulusNorms> {
    let k = modulus_at(spec, 0.0)?;
    let q = spec.q();
    Some(ModulusNorms {
        lq: k * horizon.powf(1.0 / q),
        squared_2q: k * k * horizon.powf(1.0 / q),
    })
}
