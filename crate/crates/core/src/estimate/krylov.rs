//! Krylov functionals `E int_0^T f(r, X_r) dr`, the empirical Krylov
//! constant, and the Khasminskii exponential bounds built on it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mc::McEstimate;
use super::semigroup::MAX_DIVERGED_FRACTION;
use super::testfn::{SpaceTimeFn, TestFunction};
use super::Scenario;
use crate::error::{Error, Result};
use crate::paths::{check_dims, Stepper};

/// Inflation applied to the largest observed Krylov ratio.
pub const KAPPA_SAFETY_FACTOR: f64 = 1.2;

/// Per-interval target of the Khasminskii splitting.
pub const SPLIT_THRESHOLD: f64 = 0.5;

/// Space-time exponents `(alpha, beta)` with `d/alpha + 2/beta < 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrylovExponents {
    pub alpha: f64,
    pub beta: f64,
}

impl KrylovExponents {
    pub fn new(alpha: f64, beta: f64, dim: usize) -> Result<Self> {
        if !(alpha > 1.0 && beta > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "Krylov exponents must exceed 1, got ({alpha}, {beta})"
            )));
        }
        if !(dim as f64 / alpha + 2.0 / beta < 2.0) {
            return Err(Error::InvalidArgument(format!(
                "(alpha, beta) = ({alpha}, {beta}) violates d/alpha + 2/beta < 2 for d = {dim}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// `(p/2, q/2)`: the exponents under which `|b|^2` is controlled.
    pub fn from_drift_exponents(p: f64, q: f64, dim: usize) -> Result<Self> {
        Self::new(0.5 * p, 0.5 * q, dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrylovParams {
    pub exponents: KrylovExponents,
    pub kappa: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl KrylovParams {
    pub fn new(exponents: KrylovExponents, kappa: f64, lambda: f64, gamma: f64) -> Result<Self> {
        if !(kappa > 0.0) || !(lambda > 0.0) || !(gamma >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need kappa > 0, lambda > 0, gamma >= 1; got {kappa}, {lambda}, {gamma}"
            )));
        }
        Ok(Self {
            exponents,
            kappa,
            lambda,
            gamma,
        })
    }
}

/// Monte Carlo Krylov functional with the matching mixed norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrylovValue {
    pub functional: McEstimate,
    pub norm: f64,
}

/// `E int_0^T f_j(r, X_r^x) dr` for every `f_j`, on common paths.
///
/// The time integral is the trapezoid sum over the simulation grid.
pub fn occupation_functionals(scenario: &Scenario, x: &[f64], fs: &[SpaceTimeFn]) -> Result<Vec<McEstimate>> {
    check_dims(&scenario.drift, &scenario.diffusion, x)?;
    for f in fs {
        f.spatial.validate(scenario.dim())?;
    }
    let grid = scenario.grid;
    let n = grid.n_steps();
    let h = grid.step();
    let k = fs.len();
    let rows: Vec<Result<Vec<f64>>> = (0..scenario.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut stepper = Stepper::new(&scenario.drift, &scenario.diffusion, grid, x, scenario.seed, i);
            let mut acc = vec![0.0; k];
            for (j, f) in fs.iter().enumerate() {
                acc[j] += 0.5 * f.eval(0.0, &stepper.state);
            }
            for step in 0..n {
                stepper.advance(step)?;
                let t = grid.node(step + 1);
                let w = if step + 1 == n { 0.5 } else { 1.0 };
                for (j, f) in fs.iter().enumerate() {
                    acc[j] += w * f.eval(t, &stepper.state);
                }
            }
            Ok(acc.into_iter().map(|v| v * h).collect())
        })
        .collect();
    let mut columns = vec![Vec::with_capacity(scenario.n_samples); k];
    let mut diverged = 0;
    for r in rows {
        match r {
            Ok(row) => {
                for (c, v) in columns.iter_mut().zip(row) {
                    c.push(v);
                }
            }
            Err(Error::DivergedPath { .. }) => diverged += 1,
            Err(e) => return Err(e),
        }
    }
    if diverged as f64 > MAX_DIVERGED_FRACTION * scenario.n_samples as f64 {
        return Err(Error::TooManyDiverged {
            diverged,
            total: scenario.n_samples,
        });
    }
    Ok(columns
        .iter()
        .map(|c| McEstimate::from_values(c).with_counts(diverged, 0))
        .collect())
}

pub fn krylov_functional(
    f: &SpaceTimeFn,
    scenario: &Scenario,
    x: &[f64],
    exponents: KrylovExponents,
) -> Result<KrylovValue> {
    if !f.is_nonnegative() {
        return Err(Error::InvalidArgument("Krylov functional needs f >= 0".into()));
    }
    let norm = f.mixed_norm(exponents.alpha, exponents.beta, scenario.grid.horizon(), scenario.dim())?;
    let functional = occupation_functionals(scenario, x, std::slice::from_ref(f))?.remove(0);
    Ok(KrylovValue { functional, norm })
}

/// Five space-time boxes of varying extent plus one smooth bump, centred
/// at `center`.
pub fn default_probes(horizon: f64, center: &[f64]) -> Vec<SpaceTimeFn> {
    let t = horizon;
    vec![
        SpaceTimeFn::cube(0.0, t, center, 1.0),
        SpaceTimeFn::cube(0.0, t, center, 0.25),
        SpaceTimeFn::cube(0.0, 0.5 * t, center, 0.5),
        SpaceTimeFn::cube(0.5 * t, t, center, 2.0),
        SpaceTimeFn::cube(0.0, 0.25 * t, center, 0.1),
        SpaceTimeFn::new(
            0.0,
            t,
            TestFunction::SmoothBump {
                center: center.to_vec(),
                radius: 1.0,
            },
        ),
    ]
}

/// Three boxes not in [`default_probes`], for out-of-sample checks.
pub fn held_out_probes(horizon: f64, center: &[f64]) -> Vec<SpaceTimeFn> {
    let t = horizon;
    vec![
        SpaceTimeFn::cube(0.0, t, center, 0.75),
        SpaceTimeFn::cube(0.0, 0.75 * t, center, 0.4),
        SpaceTimeFn::cube(0.25 * t, t, center, 1.5),
    ]
}

/// `center + s (1, ..., 1) / (2 sqrt d)` for `s in {-1, 0, 1}`.
pub fn default_starts(center: &[f64]) -> Vec<Vec<f64>> {
    let d = center.len() as f64;
    let step = 0.5 / d.sqrt();
    [-1.0, 0.0, 1.0]
        .iter()
        .map(|s| center.iter().map(|c| c + s * step).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRatio {
    pub probe: usize,
    pub start: Vec<f64>,
    pub functional: McEstimate,
    pub norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub kappa: f64,
    pub max_ratio: f64,
    pub safety_factor: f64,
    pub ratios: Vec<KappaRatio>,
}

/// `kappa = 1.2 * max_{probe, start} E int f / ||f||_{L^beta_alpha(T)}`.
pub fn estimate_kappa(
    scenario: &Scenario,
    exponents: KrylovExponents,
    probes: &[SpaceTimeFn],
    starts: &[Vec<f64>],
) -> Result<KappaEstimate> {
    if probes.is_empty() || starts.is_empty() {
        return Err(Error::InvalidArgument(
            "estimate_kappa needs probes and starting points".into(),
        ));
    }
    let horizon = scenario.grid.horizon();
    let mut norms = Vec::with_capacity(probes.len());
    for (i, f) in probes.iter().enumerate() {
        if !f.is_nonnegative() {
            return Err(Error::InvalidArgument(format!("probe {i} is not nonnegative")));
        }
        let n = f.mixed_norm(exponents.alpha, exponents.beta, horizon, scenario.dim())?;
        if !(n > 0.0) {
            return Err(Error::InvalidArgument(format!("probe {i} has zero norm")));
        }
        norms.push(n);
    }
    let mut ratios = Vec::with_capacity(probes.len() * starts.len());
    for start in starts {
        let values = occupation_functionals(scenario, start, probes)?;
        for (i, (v, n)) in values.into_iter().zip(&norms).enumerate() {
            ratios.push(KappaRatio {
                probe: i,
                start: start.clone(),
                ratio: v.mean / n,
                functional: v,
                norm: *n,
            });
        }
    }
    let max_ratio = ratios.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(KappaEstimate {
        kappa: KAPPA_SAFETY_FACTOR * max_ratio,
        max_ratio,
        safety_factor: KAPPA_SAFETY_FACTOR,
        ratios,
    })
}

/// `1 / (1 - lambda kappa ||f||)`: the geometric-series bound on
/// `E exp(lambda int |f|)`.
pub fn kr2_bound(lambda: f64, kappa: f64, f_norm: f64) -> Result<f64> {
    let z = lambda * kappa * f_norm;
    if !(z < 1.0) || z < 0.0 {
        return Err(Error::Domain(format!(
            "lambda kappa ||f|| = {z} must lie in [0, 1) for the series to converge"
        )));
    }
    Ok(1.0 / (1.0 - z))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KhasminskiiGamma {
    /// `+inf` once `2^n` leaves the f64 range; see `log_gamma`.
    pub gamma: f64,
    pub log_gamma: f64,
    pub pieces: usize,
    /// Interval endpoints `0 = s_0 < s_1 < ... < s_n = T`.
    pub breakpoints: Vec<f64>,
    /// `lambda kappa ||f||_{L(T)}` over the whole horizon.
    pub total_load: f64,
}

/// Exponential-moment constant via greedy splitting of `[0, T]` into
/// pieces with `lambda kappa ||f||_{[s_i, s_{i+1}]} <= 1/2`. Returns
/// `1/(1 - lambda kappa ||f||)` when one piece suffices and `2^n` otherwise.
///
/// `norm(s, t)` is the norm of `f` restricted to `[s, t]`; it must be
/// nondecreasing in `t`.
pub fn khasminskii_gamma(
    params: &KrylovParams,
    horizon: f64,
    norm: impl Fn(f64, f64) -> Result<f64>,
) -> Result<KhasminskiiGamma> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let load = |s: f64, t: f64| -> Result<f64> { Ok(params.lambda * params.kappa * norm(s, t)?) };
    let total_load = load(0.0, horizon)?;
    if total_load <= SPLIT_THRESHOLD {
        let gamma = kr2_bound(params.lambda, params.kappa, norm(0.0, horizon)?)?;
        return Ok(KhasminskiiGamma {
            gamma,
            log_gamma: gamma.ln(),
            pieces: 1,
            breakpoints: vec![0.0, horizon],
            total_load,
        });
    }
    // relative slack so bisection round-off cannot spawn a sliver piece
    let accept = SPLIT_THRESHOLD * (1.0 + 1e-9);
    let min_len = horizon * 1e-12;
    let mut breakpoints = vec![0.0];
    let mut s = 0.0;
    while s < horizon {
        if load(s, horizon)? <= accept {
            breakpoints.push(horizon);
            break;
        }
        if load(s, s + min_len)? > accept {
            return Err(Error::NonConvergence(format!(
                "norm of f on [{s}, {s} + {min_len:e}] stays above the splitting threshold"
            )));
        }
        let (mut lo, mut hi) = (s + min_len, horizon);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if load(s, mid)? <= accept {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * horizon {
                break;
            }
        }
        breakpoints.push(lo);
        s = lo;
        if breakpoints.len() > 1_000_000 {
            return Err(Error::NonConvergence(
                "Khasminskii splitting needs over 10^6 pieces".into(),
            ));
        }
    }
    let pieces = breakpoints.len() - 1;
    Ok(KhasminskiiGamma {
        gamma: 2f64.powi(pieces as i32),
        log_gamma: pieces as f64 * std::f64::consts::LN_2,
        pieces,
        breakpoints,
        total_load,
    })
}
