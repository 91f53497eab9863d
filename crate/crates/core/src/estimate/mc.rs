use serde::{Deserialize, Serialize};

/// Leaves of the reduction tree are summed sequentially.
const LEAF: usize = 64;

/// Monte Carlo estimate with its sampling diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Samples that entered the average.
    pub n: usize,
    /// `(sum w)^2 / sum w^2` for weighted estimates, `n` otherwise.
    pub ess: f64,
    pub ci95: (f64, f64),
    /// Paths dropped because the integrator produced non-finite states.
    #[serde(default)]
    pub diverged: usize,
    /// Weighted samples dropped because the weight overflowed.
    #[serde(default)]
    pub excluded: usize,
}

impl McEstimate {
    pub fn new(mean: f64, stderr: f64, n: usize, ess: f64) -> Self {
        Self {
            mean,
            stderr,
            n,
            ess,
            ci95: (mean - 1.96 * stderr, mean + 1.96 * stderr),
            diverged: 0,
            excluded: 0,
        }
    }

    /// A value known without sampling error.
    pub fn exact(value: f64) -> Self {
        Self::new(value, 0.0, 0, 0.0)
    }

    /// Plain average of `values`.
    pub fn from_values(values: &[f64]) -> Self {
        let m = Moments::reduce(values);
        let n = values.len();
        Self::new(m.mean, m.stderr(), n, n as f64)
    }

    /// Average of `products[i] = w_i f_i` with ESS computed from `weights`.
    pub fn from_weighted(products: &[f64], weights: &[f64]) -> Self {
        debug_assert_eq!(products.len(), weights.len());
        let m = Moments::reduce(products);
        let sum_w = pairwise_sum(weights, |w| w);
        let sum_w2 = pairwise_sum(weights, |w| w * w);
        let ess = if sum_w2 > 0.0 { sum_w * sum_w / sum_w2 } else { 0.0 };
        Self::new(m.mean, m.stderr(), products.len(), ess)
    }

    pub fn with_counts(mut self, diverged: usize, excluded: usize) -> Self {
        self.diverged = diverged;
        self.excluded = excluded;
        self
    }

    /// Multiply mean and stderr by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = Self::new(self.mean * c, self.stderr * c.abs(), self.n, self.ess);
        out.diverged = self.diverged;
        out.excluded = self.excluded;
        out
    }

    /// `g(mean)` with delta-method stderr `|g'(mean)| stderr`.
    pub fn map_delta(&self, value: f64, derivative: f64) -> Self {
        let mut out = Self::new(value, (derivative * self.stderr).abs(), self.n, self.ess);
        out.diverged = self.diverged;
        out.excluded = self.excluded;
        out
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci95.0 <= value && value <= self.ci95.1
    }

    /// Whether `target` lies within `k` standard errors of the mean.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Count, mean and centred sum of squares, merged pairwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub const EMPTY: Moments = Moments {
        n: 0,
        mean: 0.0,
        m2: 0.0,
    };

    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(a: Moments, b: Moments) -> Moments {
        if a.n == 0 {
            return b;
        }
        if b.n == 0 {
            return a;
        }
        let n = a.n + b.n;
        let delta = b.mean - a.mean;
        Moments {
            n,
            mean: a.mean + delta * (b.n as f64 / n as f64),
            m2: a.m2 + b.m2 + delta * delta * (a.n as f64 * b.n as f64 / n as f64),
        }
    }

    /// Fixed-shape tree reduction: the result depends only on the order of
    /// `values`, never on scheduling.
    pub fn reduce(values: &[f64]) -> Moments {
        if values.len() <= LEAF {
            let mut m = Moments::EMPTY;
            for v in values {
                m.push(*v);
            }
            return m;
        }
        let mid = values.len() / 2;
        Moments::merge(Moments::reduce(&values[..mid]), Moments::reduce(&values[mid..]))
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Pairwise sum of `f(v)` in a fixed tree order.
pub fn pairwise_sum(values: &[f64], f: impl Fn(f64) -> f64 + Copy) -> f64 {
    if values.len() <= LEAF {
        return values.iter().map(|v| f(*v)).sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid], f) + pairwise_sum(&values[mid..], f)
}

/// `log sum_i exp(v_i)`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + pairwise_sum(values, |v| (v - max).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_values_are_exact() {
        let v = vec![0.1; 1001];
        let e = McEstimate::from_values(&v);
        assert_eq!(e.mean, 0.1);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.ess, 1001.0);
    }

    #[test]
    fn matches_two_pass() {
        let v: Vec<f64> = (0..5000).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let e = McEstimate::from_values(&v);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        assert!((e.mean - mean).abs() < 1e-14);
        assert!((e.stderr - (var / v.len() as f64).sqrt()).abs() < 1e-14);
        assert_eq!(e.ci95, (e.mean - 1.96 * e.stderr, e.mean + 1.96 * e.stderr));
    }

    #[test]
    fn ess_bounds() {
        let w = vec![1.0; 100];
        assert_eq!(McEstimate::from_weighted(&w, &w).ess, 100.0);
        let w: Vec<f64> = (0..100).map(|i| 1.0 + (i % 3) as f64).collect();
        let e = McEstimate::from_weighted(&w, &w);
        assert!(e.ess < 100.0 && e.ess > 0.0);
    }

    #[test]
    fn lse_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
