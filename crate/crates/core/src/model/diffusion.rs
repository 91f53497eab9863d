use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One piece of a time-dependent noise coefficient: `sigma_t = matrix` for
/// `t` in `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaPiece {
    pub start: f64,
    pub end: f64,
    pub matrix: Vec<Vec<f64>>,
}

/// Serialized form of the noise coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSource {
    Constant(Vec<Vec<f64>>),
    Schedule { schedule: Vec<SigmaPiece> },
}

#[derive(Debug, Clone)]
struct Piece {
    start: f64,
    /// d x m, row-major
    sigma: Vec<f64>,
    /// m x d, row-major: sigma^* (sigma sigma^*)^{-1}
    weight: Vec<f64>,
    eig_min: f64,
    eig_max: f64,
}

/// Additive, uniformly elliptic noise coefficient `t -> sigma_t` (d x m).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DiffusionConfig", into = "DiffusionConfig")]
pub struct DiffusionSpec {
    source: SigmaSource,
    delta: f64,
    dim: usize,
    noise_dim: usize,
    pieces: Vec<Piece>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub sigma: SigmaSource,
    pub delta: f64,
}

impl TryFrom<DiffusionConfig> for DiffusionSpec {
    type Error = Error;

    fn try_from(c: DiffusionConfig) -> Result<Self> {
        DiffusionSpec::new(c.sigma, c.delta)
    }
}

impl From<DiffusionSpec> for DiffusionConfig {
    fn from(s: DiffusionSpec) -> Self {
        DiffusionConfig {
            sigma: s.source,
            delta: s.delta,
        }
    }
}

/// Largest tolerated residual of `sigma * weight - I`.
pub const WEIGHT_RESIDUAL_TOL: f64 = 1e-10;

impl DiffusionSpec {
    pub fn new(source: SigmaSource, delta: f64) -> Result<Self> {
        if !(delta > 1.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "ellipticity constant must lie in (1, inf), got {delta}"
            )));
        }
        let raw: Vec<(f64, f64, &Vec<Vec<f64>>)> = match &source {
            SigmaSource::Constant(m) => vec![(0.0, f64::INFINITY, m)],
            SigmaSource::Schedule { schedule } => {
                if schedule.is_empty() {
                    return Err(Error::InvalidArgument("empty sigma schedule".into()));
                }
                schedule.iter().map(|p| (p.start, p.end, &p.matrix)).collect()
            }
        };
        if raw[0].0 != 0.0 {
            return Err(Error::InvalidArgument("sigma schedule must start at t = 0".into()));
        }
        for w in raw.windows(2) {
            if w[0].1 != w[1].0 {
                return Err(Error::InvalidArgument(format!(
                    "sigma schedule is not contiguous at t = {}",
                    w[0].1
                )));
            }
        }
        let mut pieces = Vec::with_capacity(raw.len());
        let mut shape: Option<(usize, usize)> = None;
        for (start, end, rows) in raw {
            if !(end > start) {
                return Err(Error::InvalidArgument(format!("empty sigma interval [{start}, {end})")));
            }
            let piece = Piece::from_rows(start, rows, delta)?;
            let this = (rows.len(), rows[0].len());
            match shape {
                None => shape = Some(this),
                Some(s) if s != this => {
                    return Err(Error::InvalidArgument(format!(
                        "sigma schedule mixes shapes {s:?} and {this:?}"
                    )))
                }
                _ => {}
            }
            pieces.push(piece);
        }
        let (dim, noise_dim) = shape.unwrap();
        Ok(Self {
            source,
            delta,
            dim,
            noise_dim,
            pieces,
        })
    }

    /// `sigma = I_d`.
    pub fn identity(dim: usize, delta: f64) -> Result<Self> {
        let rows = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(SigmaSource::Constant(rows), delta)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn source(&self) -> &SigmaSource {
        &self.source
    }

    fn piece(&self, t: f64) -> &Piece {
        let idx = self.pieces.partition_point(|p| p.start <= t);
        &self.pieces[idx.saturating_sub(1)]
    }

    /// Row-major `d x m` matrix active at time `t`.
    pub fn sigma_at(&self, t: f64) -> &[f64] {
        &self.piece(t).sigma
    }

    /// Row-major `m x d` matrix `sigma^*(sigma sigma^*)^{-1}` active at time `t`.
    pub fn weight_at(&self, t: f64) -> &[f64] {
        &self.piece(t).weight
    }

    /// Extreme eigenvalues of `sigma sigma^*` over all pieces.
    pub fn eigen_range(&self) -> (f64, f64) {
        self.pieces.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
            (lo.min(p.eig_min), hi.max(p.eig_max))
        })
    }

    /// Whether every piece satisfies `delta^{-1} <= sigma sigma^* <= delta`.
    pub fn is_elliptic(&self) -> bool {
        let (lo, hi) = self.eigen_range();
        lo >= 1.0 / self.delta && hi <= self.delta
    }
}

impl Piece {
    fn from_rows(start: f64, rows: &[Vec<f64>], delta: f64) -> Result<Self> {
        let d = rows.len();
        if d == 0 || rows[0].is_empty() {
            return Err(Error::InvalidArgument("sigma must be non-empty".into()));
        }
        let m = rows[0].len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidArgument("sigma rows differ in length".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("sigma has non-finite entries".into()));
        }
        let sigma = DMatrix::from_fn(d, m, |i, j| rows[i][j]);
        let gram = &sigma * sigma.transpose();
        let eig = gram.clone().symmetric_eigen().eigenvalues;
        let eig_min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let eig_max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // absolute slack for eigenvalues that are exact in theory
        let slack = 1e-12;
        if eig_min < 1.0 / delta - slack || eig_max > delta + slack {
            return Err(Error::InvalidArgument(format!(
                "sigma sigma^* has eigenvalues in [{eig_min}, {eig_max}], outside [1/delta, delta] = [{}, {delta}]",
                1.0 / delta
            )));
        }
        let inv = gram
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("sigma sigma^* is singular".into()))?;
        let weight = sigma.transpose() * inv;
        let residual = (&sigma * &weight - DMatrix::<f64>::identity(d, d)).amax();
        if residual > WEIGHT_RESIDUAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "weight matrix residual {residual:e} exceeds {WEIGHT_RESIDUAL_TOL:e}"
            )));
        }
        Ok(Self {
            start,
            sigma: row_major(&sigma),
            weight: row_major(&weight),
            eig_min,
            eig_max,
        })
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// `out = a x`, with `a` row-major `rows x x.len()`.
#[inline]
pub(crate) fn mat_vec(a: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &a[i * cols..(i + 1) * cols];
        *o = row.iter().zip(x).map(|(r, v)| r * v).sum();
    }
}
