use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mc::{McEstimate, Moments};
use super::testfn::TestFunction;
use super::Scenario;
use crate::coupling::{coupled_outcome, weight, CouplingKind};
use crate::error::{Error, Result};
use crate::paths::simulate_terminal;

/// Largest tolerated share of diverged paths before an estimator fails.
pub const MAX_DIVERGED_FRACTION: f64 = 1e-3;

/// Terminal points `X_T^x` of `n_samples` independent paths, in sample order.
#[derive(Debug, Clone)]
pub struct TerminalBatch {
    pub dim: usize,
    /// `kept * dim`, row-major.
    pub points: Vec<f64>,
    pub diverged: usize,
}

impl TerminalBatch {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    /// Plain average of `g(X_T)`.
    pub fn average(&self, g: impl Fn(&[f64]) -> f64 + Sync) -> McEstimate {
        let values: Vec<f64> = self.points.par_chunks_exact(self.dim).map(&g).collect();
        McEstimate::from_values(&values).with_counts(self.diverged, 0)
    }
}

/// Coupled terminal data of `n_samples` pairs, in sample order.
#[derive(Debug, Clone)]
pub struct CoupledBatch {
    pub kind: CouplingKind,
    pub dim: usize,
    /// Base terminal points `X_T^x`.
    pub points: Vec<f64>,
    pub log_weights: Vec<f64>,
    pub phi_sq: Vec<f64>,
    pub diverged: usize,
}

impl CoupledBatch {
    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    /// Average of `R(T) g(point)` where `point` is `X_T` (Harnack) or
    /// `X_T + y` (Shift). Samples with overflowing weight are excluded and
    /// counted.
    pub fn weighted_average(&self, g: impl Fn(&[f64]) -> f64 + Sync) -> McEstimate {
        let pairs: Vec<Option<(f64, f64)>> = self
            .points
            .par_chunks_exact(self.dim)
            .zip(self.log_weights.par_iter())
            .map(|(pt, lw)| {
                let w = weight(*lw);
                if !w.is_finite() {
                    return None;
                }
                let at = self.kind.weighted_point(pt);
                Some((w * g(&at), w))
            })
            .collect();
        let excluded = pairs.iter().filter(|p| p.is_none()).count();
        let (products, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().flatten().unzip();
        McEstimate::from_weighted(&products, &weights).with_counts(self.diverged, excluded)
    }
}

fn check_divergence(diverged: usize, total: usize) -> Result<()> {
    if diverged as f64 > MAX_DIVERGED_FRACTION * total as f64 {
        return Err(Error::TooManyDiverged { diverged, total });
    }
    Ok(())
}

/// Simulate `scenario.n_samples` terminal points from `x`; sample `i` uses
/// stream `i`.
pub fn sample_terminals(scenario: &Scenario, x: &[f64]) -> Result<TerminalBatch> {
    let n = scenario.n_samples;
    let results: Vec<Result<Vec<f64>>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            simulate_terminal(
                &scenario.drift,
                &scenario.diffusion,
                x,
                &scenario.grid,
                i,
                scenario.seed,
            )
        })
        .collect();
    let mut points = Vec::with_capacity(n * x.len());
    let mut diverged = 0;
    for r in results {
        match r {
            Ok(p) => points.extend_from_slice(&p),
            Err(Error::DivergedPath { .. }) => diverged += 1,
            Err(e) => return Err(e),
        }
    }
    check_divergence(diverged, n)?;
    Ok(TerminalBatch {
        dim: x.len(),
        points,
        diverged,
    })
}

pub fn sample_coupled(scenario: &Scenario, kind: &CouplingKind) -> Result<CoupledBatch> {
    let n = scenario.n_samples;
    let results: Vec<_> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            coupled_outcome(
                &scenario.drift,
                &scenario.diffusion,
                kind,
                &scenario.grid,
                i,
                scenario.seed,
            )
        })
        .collect();
    let d = scenario.drift.dim();
    let mut batch = CoupledBatch {
        kind: kind.clone(),
        dim: d,
        points: Vec::with_capacity(n * d),
        log_weights: Vec::with_capacity(n),
        phi_sq: Vec::with_capacity(n),
        diverged: 0,
    };
    for r in results {
        match r {
            Ok(o) => {
                batch.points.extend_from_slice(&o.terminal);
                batch.log_weights.push(o.log_weight);
                batch.phi_sq.push(o.phi_sq_integral);
            }
            Err(Error::DivergedPath { .. }) => batch.diverged += 1,
            Err(e) => return Err(e),
        }
    }
    check_divergence(batch.diverged, n)?;
    Ok(batch)
}

/// `P_T f(x) = E f(X_T^x)` by plain Monte Carlo.
pub fn mc_semigroup(f: &TestFunction, scenario: &Scenario, x: &[f64]) -> Result<McEstimate> {
    f.validate(scenario.dim())?;
    Ok(sample_terminals(scenario, x)?.average(|p| f.eval(p)))
}

/// `E[R(T) f(X_T)]` (Harnack) or `E[R~(T) f(X_T + y)]` (Shift).
pub fn weighted_semigroup(f: &TestFunction, scenario: &Scenario, kind: &CouplingKind) -> Result<McEstimate> {
    f.validate(scenario.dim())?;
    Ok(sample_coupled(scenario, kind)?.weighted_average(|p| f.eval(p)))
}

/// `E[R log R]` by two routes that agree in expectation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Average of `R log R`.
    pub via_log_weight: McEstimate,
    /// Average of `R * 1/2 int |theta|^2`.
    pub via_phi_sq: McEstimate,
    /// `|difference| <= 3 sqrt(se_1^2 + se_2^2)`.
    pub consistent: bool,
}

pub fn entropy_from_batch(batch: &CoupledBatch) -> EntropyEstimate {
    let mut a = Vec::with_capacity(batch.len());
    let mut b = Vec::with_capacity(batch.len());
    let mut w = Vec::with_capacity(batch.len());
    let mut excluded = 0;
    for (lw, sq) in batch.log_weights.iter().zip(&batch.phi_sq) {
        let r = weight(*lw);
        if !r.is_finite() {
            excluded += 1;
            continue;
        }
        a.push(r * lw);
        b.push(r * 0.5 * sq);
        w.push(r);
    }
    let via_log_weight = McEstimate::from_weighted(&a, &w).with_counts(batch.diverged, excluded);
    let via_phi_sq = McEstimate::from_weighted(&b, &w).with_counts(batch.diverged, excluded);
    let combined = via_log_weight.stderr.hypot(via_phi_sq.stderr);
    let consistent = (via_log_weight.mean - via_phi_sq.mean).abs() <= 3.0 * combined;
    EntropyEstimate {
        via_log_weight,
        via_phi_sq,
        consistent,
    }
}

pub fn entropy_weight(scenario: &Scenario, kind: &CouplingKind) -> Result<EntropyEstimate> {
    Ok(entropy_from_batch(&sample_coupled(scenario, kind)?))
}

/// `E R^r` with `r = p/(p-1)`, averaged in shifted log space.
pub fn weight_moment_from_batch(batch: &CoupledBatch, p: f64) -> Result<McEstimate> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("moment exponent needs p > 1, got {p}")));
    }
    let r = p / (p - 1.0);
    let scaled: Vec<f64> = batch.log_weights.iter().map(|lw| r * lw).collect();
    let shift = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let values: Vec<f64> = scaled.iter().map(|v| (v - shift).exp()).collect();
    let m = Moments::reduce(&values);
    let n = values.len();
    let factor = shift.exp();
    Ok(McEstimate::new(m.mean * factor, m.stderr() * factor, n, n as f64).with_counts(batch.diverged, 0))
}

pub fn weight_moment(scenario: &Scenario, kind: &CouplingKind, p: f64) -> Result<McEstimate> {
    weight_moment_from_batch(&sample_coupled(scenario, kind)?, p)
}
