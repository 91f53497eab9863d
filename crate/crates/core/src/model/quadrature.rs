//! Numerical integration used for Lebesgue norms of drifts and test functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resolution and tolerance knobs for the tensor-grid integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureParams {
    /// Nodes per axis on the first pass.
    pub initial_nodes: usize,
    /// Relative change between successive refinements accepted as converged.
    pub rel_tol: f64,
    /// Upper bound on the total number of integrand evaluations per pass.
    pub max_evaluations: usize,
}

impl Default for QuadratureParams {
    fn default() -> Self {
        Self {
            initial_nodes: 32,
            rel_tol: 1e-6,
            max_evaluations: 1 << 24,
        }
    }
}

/// Adaptive Simpson on `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson over consecutive pieces `[breaks[i], breaks[i+1]]`.
///
/// Breakpoints should sit on the kinks of a piecewise-smooth integrand.
pub fn piecewise_simpson<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: f64) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|v| v.is_finite()).collect();
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    pts.windows(2).map(|w| simpson(f, w[0], w[1], tol)).sum()
}

/// Tensor-product trapezoid rule with `n` intervals per axis.
pub fn tensor_trapezoid<F: Fn(&[f64]) -> f64>(f: &F, lower: &[f64], upper: &[f64], n: usize) -> f64 {
    let d = lower.len();
    let h: Vec<f64> = (0..d).map(|i| (upper[i] - lower[i]) / n as f64).collect();
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for i in 0..d {
            point[i] = if idx[i] == n {
                upper[i]
            } else {
                lower[i] + idx[i] as f64 * h[i]
            };
            if idx[i] == 0 || idx[i] == n {
                w *= 0.5;
            }
        }
        total += w * f(&point);
        // odometer increment
        let mut axis = 0;
        loop {
            if axis == d {
                return total * h.iter().product::<f64>();
            }
            idx[axis] += 1;
            if idx[axis] <= n {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// Repeatedly doubles the tensor-grid resolution until two successive
/// trapezoid estimates agree to `params.rel_tol`.
pub fn adaptive_tensor<F: Fn(&[f64]) -> f64>(
    f: &F,
    lower: &[f64],
    upper: &[f64],
    params: &QuadratureParams,
) -> Result<f64> {
    let d = lower.len();
    if d == 0 {
        return Ok(f(&[]));
    }
    if lower.iter().zip(upper).any(|(l, u)| !(u > l)) {
        return Ok(0.0);
    }
    let mut n = params.initial_nodes.max(2);
    let mut prev = tensor_trapezoid(f, lower, upper, n);
    loop {
        let next_n = 2 * n;
        if ((next_n + 1) as f64).powi(d as i32) > params.max_evaluations as f64 {
            return Err(Error::NonConvergence(format!(
                "tensor quadrature in d={d} stalled at {n} nodes per axis (last estimate {prev:e})"
            )));
        }
        let next = tensor_trapezoid(f, lower, upper, next_n);
        if !next.is_finite() {
            return Err(Error::NonConvergence(format!(
                "integrand produced non-finite value {next}"
            )));
        }
        let scale = next.abs().max(f64::MIN_POSITIVE);
        if (next - prev).abs() <= params.rel_tol * scale || next == prev {
            return Ok(next);
        }
        prev = next;
        n = next_n;
    }
}

/// Integral of `f` over all of R^d for an integrand that decays away from
/// `[lower, upper]`: the box is enlarged until the contribution of the
/// added shell drops below `1e-6` of the total.
pub fn integrate_enlarging<F: Fn(&[f64]) -> f64>(
    f: &F,
    lower: &[f64],
    upper: &[f64],
    params: &QuadratureParams,
) -> Result<f64> {
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();
    let mut total = adaptive_tensor(f, &lo, &hi, params)?;
    for _ in 0..8 {
        let pad: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (h - l).max(1.0)).collect();
        let lo2: Vec<f64> = lo.iter().zip(&pad).map(|(l, p)| l - p).collect();
        let hi2: Vec<f64> = hi.iter().zip(&pad).map(|(h, p)| h + p).collect();
        let enlarged = adaptive_tensor(f, &lo2, &hi2, params)?;
        let shell = (enlarged - total).abs();
        lo = lo2;
        hi = hi2;
        if shell <= 1e-6 * enlarged.abs().max(f64::MIN_POSITIVE) {
            return Ok(enlarged);
        }
        total = enlarged;
    }
    Err(Error::NonConvergence(format!(
        "boundary contribution did not vanish while enlarging the box (last total {total:e})"
    )))
}
