#![allow(dead_code)]

use harnack_lab::coupling::{CoupledSample, CouplingKind};
use harnack_lab::estimate::{Scenario, TestFunction};
use harnack_lab::model::{DiffusionSpec, DriftSpec};
use harnack_lab::paths::TimeGrid;
use nalgebra::{DMatrix, DVector};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

pub const DELTA: f64 = 1.01;

pub fn zero_drift(dim: usize) -> DriftSpec {
    DriftSpec::zero(dim, 4.0, 4.0).unwrap()
}

/// a = 1 on [0, 1] with ramps of width 0.1, p = q = 4.
pub fn mollified() -> DriftSpec {
    DriftSpec::mollified_indicator(vec![1.0], vec![0.0], vec![1.0], 0.1, 4.0, 4.0).unwrap()
}

pub fn scenario(drift: DriftSpec, n_steps: usize, n_samples: usize, seed: u64) -> Scenario {
    let d = drift.dim();
    Scenario::new(
        drift,
        DiffusionSpec::identity(d, DELTA).unwrap(),
        TimeGrid::new(1.0, n_steps).unwrap(),
        n_samples,
        seed,
    )
}

pub fn bump() -> TestFunction {
    TestFunction::SmoothBump {
        center: vec![0.5],
        radius: 1.0,
    }
}

pub fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

pub fn gauss_pdf(x: f64) -> f64 {
    std_normal().pdf(x)
}

/// `P(|x + W_r| <= l)`.
pub fn box_probability(x: f64, l: f64, r: f64) -> f64 {
    if r == 0.0 {
        return if x.abs() <= l { 1.0 } else { 0.0 };
    }
    let n = std_normal();
    let s = r.sqrt();
    n.cdf((l - x) / s) - n.cdf((-l - x) / s)
}

/// Composite Simpson with `2n` panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let m = 2 * n;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `int_s^e P(|x + W_r| <= l) dr` for one-dimensional Brownian motion.
pub fn occupation_oracle(x: f64, l: f64, s: f64, e: f64) -> f64 {
    simpson(|r| box_probability(x, l, r), s, e, 20_000)
}

/// `E exp(u (x + W_T))`.
pub fn gaussian_mgf(u: f64, x: f64, t: f64) -> f64 {
    (u * x + 0.5 * u * u * t).exp()
}

/// `E R^r` for a Gaussian log-weight with variance `s^2`: `exp(r(r-1)s^2/2)`.
pub fn lognormal_moment(r: f64, s2: f64) -> f64 {
    (r * (r - 1.0) * s2 / 2.0).exp()
}

/// Rebuild `Phi`, `theta`, the partner's Euler chain under the new noise
/// `dW + theta h`, and `log R`, and return the largest discrepancy with
/// what the sample stores.
pub fn recursion_deviation(s: &CoupledSample, drift: &DriftSpec, sigma: &DMatrix<f64>) -> f64 {
    let grid = s.base.grid;
    let (n, h, t_end) = (grid.n_steps(), grid.step(), grid.horizon());
    let d = s.base.dim;
    let v: Vec<f64> = match &s.kind {
        CouplingKind::Harnack { x, y } => x.iter().zip(y).map(|(a, b)| a - b).collect(),
        CouplingKind::Shift { y, .. } => y.clone(),
    };
    let gram = sigma * sigma.transpose();
    let weight = sigma.transpose() * gram.try_inverse().unwrap();
    let mut worst = 0.0f64;
    let mut log_r = 0.0;
    let start = match &s.kind {
        CouplingKind::Harnack { y, .. } => y.clone(),
        CouplingKind::Shift { x, .. } => x.clone(),
    };
    let mut y_chain = DVector::from_vec(start);
    for k in 0..=n {
        let t = grid.node(k);
        let bx = drift.eval(t, s.base.state(k)).unwrap();
        let by = drift.eval(t, s.partner_state(k)).unwrap();
        let phi: Vec<f64> = (0..d).map(|i| bx[i] - by[i] + v[i] / t_end).collect();
        for (a, b) in phi.iter().zip(s.phi_at(k)) {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in y_chain.iter().zip(s.partner_state(k)) {
            worst = worst.max((a - b).abs());
        }
        if k == n {
            break;
        }
        let theta = &weight * DVector::from_vec(phi);
        let dw = DVector::from_column_slice(s.base.increment(k));
        log_r -= theta.dot(&dw) + 0.5 * theta.norm_squared() * h;
        let shifted_noise = dw + &theta * h;
        let by = DVector::from_vec(by);
        y_chain = &y_chain + by * h + sigma * shifted_noise;
    }
    worst.max((log_r - s.log_weight).abs())
}
