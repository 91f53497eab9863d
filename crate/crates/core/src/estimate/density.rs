use serde::{Deserialize, Serialize};

use super::semigroup::sample_terminals;
use super::Scenario;
use crate::error::{Error, Result};

/// Piecewise-constant density of `X_T` on `bins` equal cells of `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityHistogram {
    pub lo: f64,
    pub hi: f64,
    pub density: Vec<f64>,
    /// Samples outside `[lo, hi]`, folded into the edge bins.
    pub clamped: usize,
    pub diverged: usize,
    pub n: usize,
}

impl DensityHistogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.density.len() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.density.len())
            .map(|i| self.lo + (i as f64 + 0.5) * w)
            .collect()
    }

    /// `sum density * width`; equals the kept fraction of paths.
    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }

    pub fn mode(&self) -> f64 {
        let (i, _) =
            self.density.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc },
            );
        self.centers()[i]
    }

    /// `max_i |density_i - g(center_i)|`.
    pub fn sup_distance(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.centers()
            .iter()
            .zip(&self.density)
            .map(|(c, v)| (v - g(*c)).abs())
            .fold(0.0, f64::max)
    }
}

pub fn density_histogram(scenario: &Scenario, x: &[f64], lo: f64, hi: f64, bins: usize) -> Result<DensityHistogram> {
    if scenario.dim() != 1 {
        return Err(Error::UnsupportedDimension(scenario.dim()));
    }
    if bins == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "bad histogram range [{lo}, {hi}] with {bins} bins"
        )));
    }
    let batch = sample_terminals(scenario, x)?;
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut clamped = 0;
    for p in batch.iter() {
        let v = p[0];
        let raw = ((v - lo) / w).floor();
        if raw < 0.0 || raw >= bins as f64 {
            clamped += 1;
        }
        counts[raw.clamp(0.0, (bins - 1) as f64) as usize] += 1;
    }
    let total = scenario.n_samples as f64;
    Ok(DensityHistogram {
        lo,
        hi,
        density: counts.iter().map(|c| *c as f64 / (total * w)).collect(),
        clamped,
        diverged: batch.diverged,
        n: scenario.n_samples,
    })
}
