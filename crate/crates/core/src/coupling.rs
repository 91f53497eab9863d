//! Couplings by change of measure.
//!
//! Both couplings reuse the noise of a single Euler-Maruyama path `X` from
//! `x`. The partner process is never integrated: it is defined by the
//! linear bridge
//!
//! ```text
//! Harnack:  Y_t = X_t + (t - T)(x - y)/T      (Y_0 = y, Y_T = X_T)
//! Shift:    Y_t = X_t + (t/T) y               (Y_0 = x, Y_T = X_T + y)
//! ```
//!
//! and the drift mismatch `Phi(t) = b_t(X_t) - b_t(Y_t) + v/T` (with `v`
//! the bridge vector) is absorbed into the log-weight
//!
//! ```text
//! log R = - sum_k <theta_k, dW_k> - 1/2 sum_k |theta_k|^2 h,
//! theta_k = sigma^*(sigma sigma^*)^{-1} Phi(t_k),
//! ```
//!
//! with left-point (Ito) sums. Since `theta_k` only depends on the path up
//! to `t_k`, under the reweighted measure the partner is itself an exact
//! Euler-Maruyama chain of the same equation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::diffusion::mat_vec;
use crate::model::{DiffusionSpec, DriftSpec};
use crate::paths::{check_dims, SamplePath, Stepper, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingKind {
    /// Partner starts at `y` and meets `X^x` at time `T`.
    Harnack { x: Vec<f64>, y: Vec<f64> },
    /// Partner starts at `x` and ends at `X^x_T + y`.
    Shift { x: Vec<f64>, y: Vec<f64> },
}

impl CouplingKind {
    pub fn start(&self) -> &[f64] {
        match self {
            CouplingKind::Harnack { x, .. } | CouplingKind::Shift { x, .. } => x,
        }
    }

    pub fn other(&self) -> &[f64] {
        match self {
            CouplingKind::Harnack { y, .. } | CouplingKind::Shift { y, .. } => y,
        }
    }

    /// Bridge vector `v`: `x - y` for Harnack, `y` for Shift.
    pub fn bridge_vector(&self) -> Vec<f64> {
        match self {
            CouplingKind::Harnack { x, y } => x.iter().zip(y).map(|(a, b)| a - b).collect(),
            CouplingKind::Shift { y, .. } => y.clone(),
        }
    }

    /// Coefficient `c(t)` with partner `= X_t + c(t) v`.
    #[inline]
    pub fn bridge_coefficient(&self, t: f64, horizon: f64) -> f64 {
        match self {
            CouplingKind::Harnack { .. } => (t - horizon) / horizon,
            CouplingKind::Shift { .. } => t / horizon,
        }
    }

    /// Point at which the test function is evaluated under the weight:
    /// `X_T` for Harnack, `X_T + y` for Shift.
    pub fn weighted_point(&self, terminal: &[f64]) -> Vec<f64> {
        match self {
            CouplingKind::Harnack { .. } => terminal.to_vec(),
            CouplingKind::Shift { y, .. } => terminal.iter().zip(y).map(|(a, b)| a + b).collect(),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let (x, y) = (self.start(), self.other());
        for v in [x, y] {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument("coupling endpoints must be finite".into()));
            }
        }
        Ok(())
    }
}

/// One coupled pair on the simulation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledSample {
    pub base: SamplePath,
    /// Partner states, `(n_steps + 1) * dim`.
    pub partner: Vec<f64>,
    /// `Phi(t_k)` at every node, `(n_steps + 1) * dim`.
    pub phi: Vec<f64>,
    pub log_weight: f64,
    pub kind: CouplingKind,
    /// `sum_k |theta_k|^2 h`.
    pub phi_sq_integral: f64,
}

impl CoupledSample {
    pub fn partner_state(&self, k: usize) -> &[f64] {
        let d = self.base.dim;
        &self.partner[k * d..(k + 1) * d]
    }

    pub fn phi_at(&self, k: usize) -> &[f64] {
        let d = self.base.dim;
        &self.phi[k * d..(k + 1) * d]
    }

    /// `R(T) = exp(log R(T))`; `+inf` on overflow.
    pub fn weight(&self) -> f64 {
        weight(self.log_weight)
    }

    /// Largest deviation of the stored partner from the bridge identity.
    pub fn bridge_deviation(&self) -> f64 {
        let grid = self.base.grid;
        let v = self.kind.bridge_vector();
        let mut worst = 0.0f64;
        for k in 0..=grid.n_steps() {
            let c = self.kind.bridge_coefficient(grid.node(k), grid.horizon());
            for ((p, x), vi) in self.partner_state(k).iter().zip(self.base.state(k)).zip(&v) {
                worst = worst.max(((p - x) - c * vi).abs());
            }
        }
        worst
    }
}

/// `exp(log_weight)`, strictly positive, `+inf` when it overflows.
#[inline]
pub fn weight(log_weight: f64) -> f64 {
    log_weight.exp()
}

/// Terminal data of one coupled pair; what the estimators consume.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledOutcome {
    pub terminal: Vec<f64>,
    pub log_weight: f64,
    pub phi_sq_integral: f64,
}

struct Trace {
    states: Vec<f64>,
    increments: Vec<f64>,
    partner: Vec<f64>,
    phi: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn run(
    drift: &DriftSpec,
    diffusion: &DiffusionSpec,
    kind: &CouplingKind,
    grid: &TimeGrid,
    stream_id: u64,
    seed: u64,
    mut trace: Option<&mut Trace>,
) -> Result<CoupledOutcome> {
    let x = kind.start();
    check_dims(drift, diffusion, x)?;
    kind.validate(drift.dim())?;
    let d = drift.dim();
    let m = diffusion.noise_dim();
    let horizon = grid.horizon();
    let h = grid.step();
    let v = kind.bridge_vector();
    let correction: Vec<f64> = v.iter().map(|c| c / horizon).collect();

    let mut stepper = Stepper::new(drift, diffusion, *grid, x, seed, stream_id);
    let mut partner = vec![0.0; d];
    let mut b_partner = vec![0.0; d];
    let mut phi = vec![0.0; d];
    let mut theta = vec![0.0; m];
    let mut log_weight = 0.0;
    let mut phi_sq = 0.0;

    let fill_partner = |state: &[f64], t: f64, out: &mut [f64]| {
        let c = kind.bridge_coefficient(t, horizon);
        for ((o, s), vi) in out.iter_mut().zip(state).zip(&v) {
            *o = s + c * vi;
        }
    };

    for k in 0..grid.n_steps() {
        let t = grid.node(k);
        fill_partner(&stepper.state, t, &mut partner);
        drift.eval_into(t, &partner, &mut b_partner);
        if let Some(tr) = trace.as_deref_mut() {
            tr.states.extend_from_slice(&stepper.state);
            tr.partner.extend_from_slice(&partner);
        }
        // advance evaluates b_t(X_k) into stepper.b and draws dW_k
        stepper.advance(k)?;
        for i in 0..d {
            phi[i] = stepper.b[i] - b_partner[i] + correction[i];
        }
        mat_vec(diffusion.weight_at(t), &phi, &mut theta);
        let mut dot = 0.0;
        let mut sq = 0.0;
        for (th, dw) in theta.iter().zip(&stepper.dw) {
            dot += th * dw;
            sq += th * th;
        }
        log_weight -= dot + 0.5 * sq * h;
        phi_sq += sq * h;
        if let Some(tr) = trace.as_deref_mut() {
            tr.phi.extend_from_slice(&phi);
            tr.increments.extend_from_slice(&stepper.dw);
        }
    }
    if let Some(tr) = trace {
        let t = horizon;
        fill_partner(&stepper.state, t, &mut partner);
        let mut b_x = vec![0.0; d];
        drift.eval_into(t, &stepper.state, &mut b_x);
        drift.eval_into(t, &partner, &mut b_partner);
        for i in 0..d {
            phi[i] = b_x[i] - b_partner[i] + correction[i];
        }
        tr.states.extend_from_slice(&stepper.state);
        tr.partner.extend_from_slice(&partner);
        tr.phi.extend_from_slice(&phi);
    }
    if !log_weight.is_finite() {
        return Err(Error::DivergedPath {
            step: grid.n_steps(),
            stream_id,
        });
    }
    Ok(CoupledOutcome {
        terminal: stepper.state,
        log_weight,
        phi_sq_integral: phi_sq,
    })
}

fn full_sample(
    drift: &DriftSpec,
    diffusion: &DiffusionSpec,
    kind: CouplingKind,
    grid: &TimeGrid,
    stream_id: u64,
    seed: u64,
) -> Result<CoupledSample> {
    let n = grid.n_steps();
    let d = drift.dim();
    let mut trace = Trace {
        states: Vec::with_capacity((n + 1) * d),
        increments: Vec::with_capacity(n * diffusion.noise_dim()),
        partner: Vec::with_capacity((n + 1) * d),
        phi: Vec::with_capacity((n + 1) * d),
    };
    let out = run(drift, diffusion, &kind, grid, stream_id, seed, Some(&mut trace))?;
    Ok(CoupledSample {
        base: SamplePath {
            grid: *grid,
            dim: d,
            noise_dim: diffusion.noise_dim(),
            states: trace.states,
            increments: trace.increments,
            stream_id,
        },
        partner: trace.partner,
        phi: trace.phi,
        log_weight: out.log_weight,
        kind,
        phi_sq_integral: out.phi_sq_integral,
    })
}

/// Coupling whose partner starts at `y` and meets `X^x` at `T`.
pub fn harnack_coupling(
    drift: &DriftSpec,
    diffusion: &DiffusionSpec,
    x: &[f64],
    y: &[f64],
    grid: &TimeGrid,
    stream_id: u64,
    seed: u64,
) -> Result<CoupledSample> {
    let kind = CouplingKind::Harnack {
        x: x.to_vec(),
        y: y.to_vec(),
    };
    full_sample(drift, diffusion, kind, grid, stream_id, seed)
}

/// Coupling whose partner starts at `x` and ends at `X^x_T + y`.
pub fn shift_coupling(
    drift: &DriftSpec,
    diffusion: &DiffusionSpec,
    x: &[f64],
    y: &[f64],
    grid: &TimeGrid,
    stream_id: u64,
    seed: u64,
) -> Result<CoupledSample> {
    let kind = CouplingKind::Shift {
        x: x.to_vec(),
        y: y.to_vec(),
    };
    full_sample(drift, diffusion, kind, grid, stream_id, seed)
}

/// Same arithmetic as [`harnack_coupling`] / [`shift_coupling`] without
/// storing the path.
pub fn coupled_outcome(
    drift: &DriftSpec,
    diffusion: &DiffusionSpec,
    kind: &CouplingKind,
    grid: &TimeGrid,
    stream_id: u64,
    seed: u64,
) -> Result<CoupledOutcome> {
    run(drift, diffusion, kind, grid, stream_id, seed, None)
}
