//! Seedable Brownian increments and Euler-Maruyama paths.
//!
//! Noise is drawn from a ChaCha8 keystream keyed by the seed, with the
//! stream id selecting the ChaCha stream and the step index selecting a
//! fixed block of words inside it. Increment `k` of stream `s` under seed
//! `seed` is therefore a pure function of `(seed, s, k)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::diffusion::mat_vec;
use crate::model::{DiffusionSpec, DriftSpec};

/// Uniform grid `t_k = k T / n` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// `t_k`; `t_0 = 0` and `t_n = T` exactly.
    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        self.horizon * (k as f64 / self.n_steps as f64)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.node(k)).collect()
    }
}

/// Standard normal source for one `(seed, stream_id)` pair.
pub struct NoiseStream {
    rng: ChaCha8Rng,
    noise_dim: usize,
}

impl NoiseStream {
    pub fn new(seed: u64, stream_id: u64, noise_dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { rng, noise_dim }
    }

    /// 32-bit words consumed per step: one pair of u64 per pair of normals.
    fn words_per_step(&self) -> u128 {
        4 * self.noise_dim.div_ceil(2) as u128
    }

    /// Position the stream at the start of step `k`.
    pub fn seek(&mut self, k: usize) {
        let pos = k as u128 * self.words_per_step();
        self.rng.set_word_pos(pos);
    }

    #[inline]
    fn uniform_open(&mut self) -> f64 {
        // (0, 1]
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Fill `out` (length `noise_dim`) with `scale * N(0, I)`, consuming
    /// exactly one step's worth of words.
    #[inline]
    pub fn fill_step(&mut self, scale: f64, out: &mut [f64]) {
        let mut i = 0;
        while i < self.noise_dim {
            let u1 = self.uniform_open();
            let u2 = self.uniform_open();
            let r = (-2.0 * u1.ln()).sqrt() * scale;
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            out[i] = r * c;
            if i + 1 < self.noise_dim {
                out[i + 1] = r * s;
            }
            i += 2;
        }
    }
}

/// `n_steps` increments `Delta W_k ~ N(0, h I_m)`, flattened row-major.
pub fn brownian_increments(stream_id: u64, grid: &TimeGrid, noise_dim: usize, seed: u64) -> Vec<f64> {
    let mut stream = NoiseStream::new(seed, stream_id, noise_dim);
    stream.seek(0);
    let scale = grid.step().sqrt();
    let mut out = vec![0.0; grid.n_steps() * noise_dim];
    for chunk in out.chunks_exact_mut(noise_dim) {
        stream.fill_step(scale, chunk);
    }
    out
}

/// Increment `k` alone, drawn by seeking directly to its counter.
pub fn brownian_increment_at(stream_id: u64, grid: &TimeGrid, noise_dim: usize, seed: u64, k: usize) -> Vec<f64> {
    let mut stream = NoiseStream::new(seed, stream_id, noise_dim);
    stream.seek(k);
    let mut out = vec![0.0; noise_dim];
    stream.fill_step(grid.step().sqrt(), &mut out);
    out
}

/// One simulated Euler-Maruyama path with its driving increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub grid: TimeGrid,
    pub dim: usize,
    pub noise_dim: usize,
    /// `(n_steps + 1) * dim`, row-major.
    pub states: Vec<f64>,
    /// `n_steps * noise_dim`, row-major.
    pub increments: Vec<f64>,
    pub stream_id: u64,
}

impl SamplePath {
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.noise_dim..(k + 1) * self.noise_dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.grid.n_steps())
    }
}

pub(crate) fn check_dims(drift: &DriftSpec, diffusion: &DiffusionSpec, x0: &[f64]) -> Result<()> {
    if drift.dim() != diffusion.dim() {
        return Err(Error::DimensionMismatch {
            expected: drift.dim(),
            got: diffusion.dim(),
        });
    }
    if x0.len() != drift.dim() {
        return Err(Error::DimensionMismatch {
            expected: drift.dim(),
            got: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial point must be finite".into()));
    }
    Ok(())
}

/// Scratch buffers for one Euler-Maruyama walk.
pub(crate) struct Stepper<'a> {
    drift: &'a DriftSpec,
    diffusion: &'a DiffusionSpec,
    grid: TimeGrid,
    noise: NoiseStream,
    pub(crate) state: Vec<f64>,
    pub(crate) dw: Vec<f64>,
    pub(crate) b: Vec<f64>,
    sdw: Vec<f64>,
    sqrt_h: f64,
    h: f64,
    stream_id: u64,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(
        drift: &'a DriftSpec,
        diffusion: &'a DiffusionSpec,
        grid: TimeGrid,
        x0: &[f64],
        seed: u64,
        stream_id: u64,
    ) -> Self {
        let m = diffusion.noise_dim();
        let mut noise = NoiseStream::new(seed, stream_id, m);
        noise.seek(0);
        Self {
            drift,
            diffusion,
            grid,
            noise,
            state: x0.to_vec(),
            dw: vec![0.0; m],
            b: vec![0.0; x0.len()],
            sdw: vec![0.0; x0.len()],
            sqrt_h: grid.step().sqrt(),
            h: grid.step(),
            stream_id,
        }
    }

    /// Advance from `t_k` to `t_{k+1}`. On return `self.b` holds
    /// `b_{t_k}(X_k)` and `self.dw` holds `Delta W_k`.
    #[inline]
    pub(crate) fn advance(&mut self, k: usize) -> Result<()> {
        let t = self.grid.node(k);
        self.noise.fill_step(self.sqrt_h, &mut self.dw);
        self.drift.eval_into(t, &self.state, &mut self.b);
        mat_vec(self.diffusion.sigma_at(t), &self.dw, &mut self.sdw);
        let mut finite = true;
        for ((x, b), s) in self.state.iter_mut().zip(&self.b).zip(&self.sdw) {
            *x += b * self.h + s;
            finite &= x.is_finite();
        }
        if !finite {
            return Err(Error::DivergedPath {
                step: k + 1,
                stream_id: self.stream_id,
            });
        }
        Ok(())
    }
}

/// `X_{k+1} = X_k + b_{t_k}(X_k) h + sigma_{t_k} Delta W_k`.
pub fn simulate_path(
    drift: &DriftSpec,
    diffusion: &DiffusionSpec,
    x0: &[f64],
    grid: &TimeGrid,
    stream_id: u64,
    seed: u64,
) -> Result<SamplePath> {
    check_dims(drift, diffusion, x0)?;
    let d = drift.dim();
    let m = diffusion.noise_dim();
    let n = grid.n_steps();
    let mut states = Vec::with_capacity((n + 1) * d);
    let mut increments = Vec::with_capacity(n * m);
    states.extend_from_slice(x0);
    let mut stepper = Stepper::new(drift, diffusion, *grid, x0, seed, stream_id);
    for k in 0..n {
        stepper.advance(k)?;
        increments.extend_from_slice(&stepper.dw);
        states.extend_from_slice(&stepper.state);
    }
    Ok(SamplePath {
        grid: *grid,
        dim: d,
        noise_dim: m,
        states,
        increments,
        stream_id,
    })
}

/// Terminal value `X_T` without storing the path.
pub fn simulate_terminal(
    drift: &DriftSpec,
    diffusion: &DiffusionSpec,
    x0: &[f64],
    grid: &TimeGrid,
    stream_id: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    check_dims(drift, diffusion, x0)?;
    let mut stepper = Stepper::new(drift, diffusion, *grid, x0, seed, stream_id);
    for k in 0..grid.n_steps() {
        stepper.advance(k)?;
    }
    Ok(stepper.state)
}
