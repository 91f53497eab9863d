use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::quadrature::{adaptive_tensor, simpson, QuadratureParams};

/// Test function `f: R^d -> R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant {
        value: f64,
    },
    /// `exp(<u, x>)`.
    Exponential {
        u: Vec<f64>,
    },
    /// `x_i`.
    Coordinate {
        index: usize,
    },
    /// `x_i^2`.
    Square {
        index: usize,
    },
    /// `1_{[lower, upper]}(x)`.
    IndicatorBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// `exp(1 - 1/(1 - |x - c|^2 / r^2))` inside the ball, 0 outside; peak 1.
    SmoothBump {
        center: Vec<f64>,
        radius: f64,
    },
    /// Multilinear interpolation of node values on a regular lattice,
    /// zero outside it (row-major, last axis fastest).
    Grid {
        origin: Vec<f64>,
        spacing: Vec<f64>,
        shape: Vec<usize>,
        values: Vec<f64>,
    },
}

impl TestFunction {
    pub fn constant(value: f64) -> Self {
        TestFunction::Constant { value }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::Constant { .. } => "constant",
            TestFunction::Exponential { .. } => "exponential",
            TestFunction::Coordinate { .. } => "coordinate",
            TestFunction::Square { .. } => "square",
            TestFunction::IndicatorBox { .. } => "indicator_box",
            TestFunction::SmoothBump { .. } => "smooth_bump",
            TestFunction::Grid { .. } => "grid",
        }
    }

    /// Check the function's own dimension (if it has one) against `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let mismatch = |got: usize| Error::DimensionMismatch { expected: dim, got };
        match self {
            TestFunction::Constant { value } if !value.is_finite() => {
                Err(Error::InvalidArgument("constant must be finite".into()))
            }
            TestFunction::Constant { .. } => Ok(()),
            TestFunction::Exponential { u } if u.len() != dim => Err(mismatch(u.len())),
            TestFunction::Coordinate { index } | TestFunction::Square { index } if *index >= dim => Err(
                Error::InvalidArgument(format!("coordinate {index} out of range for d={dim}")),
            ),
            TestFunction::IndicatorBox { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return Err(mismatch(lower.len()));
                }
                if lower.iter().zip(upper).any(|(l, u)| l > u) {
                    return Err(Error::InvalidArgument("indicator box needs lower <= upper".into()));
                }
                Ok(())
            }
            TestFunction::SmoothBump { center, radius } => {
                if center.len() != dim {
                    return Err(mismatch(center.len()));
                }
                if !(*radius > 0.0) {
                    return Err(Error::InvalidArgument("bump radius must be positive".into()));
                }
                Ok(())
            }
            TestFunction::Grid {
                origin,
                spacing,
                shape,
                values,
            } => {
                if origin.len() != dim || spacing.len() != dim || shape.len() != dim {
                    return Err(mismatch(origin.len()));
                }
                if shape.iter().any(|n| *n < 2) || spacing.iter().any(|h| !(*h > 0.0)) {
                    return Err(Error::InvalidArgument(
                        "grid test function needs >= 2 nodes and positive spacing per axis".into(),
                    ));
                }
                if values.len() != shape.iter().product::<usize>() {
                    return Err(Error::InvalidArgument("grid test function value count mismatch".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Exponential { u } => u.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().exp(),
            TestFunction::Coordinate { index } => x[*index],
            TestFunction::Square { index } => x[*index] * x[*index],
            TestFunction::IndicatorBox { lower, upper } => {
                let inside = x
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .all(|(v, (l, u))| *l <= *v && *v <= *u);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::SmoothBump { center, radius } => {
                let s = bump_radius_sq(x, center, *radius);
                if s >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - s)).exp()
                }
            }
            TestFunction::Grid {
                origin,
                spacing,
                shape,
                values,
            } => grid_eval(origin, spacing, shape, values, x),
        }
    }

    /// Analytic gradient for the smooth tags.
    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let d = x.len();
        match self {
            TestFunction::Constant { .. } => Some(vec![0.0; d]),
            TestFunction::Exponential { u } => {
                let e = self.eval(x);
                Some(u.iter().map(|a| a * e).collect())
            }
            TestFunction::Coordinate { index } => {
                let mut g = vec![0.0; d];
                g[*index] = 1.0;
                Some(g)
            }
            TestFunction::Square { index } => {
                let mut g = vec![0.0; d];
                g[*index] = 2.0 * x[*index];
                Some(g)
            }
            TestFunction::SmoothBump { center, radius } => {
                let s = bump_radius_sq(x, center, *radius);
                if s >= 1.0 {
                    return Some(vec![0.0; d]);
                }
                let psi = (1.0 - 1.0 / (1.0 - s)).exp();
                let c = -2.0 * psi / (radius * radius * (1.0 - s) * (1.0 - s));
                Some(x.iter().zip(center).map(|(a, b)| c * (a - b)).collect())
            }
            TestFunction::IndicatorBox { .. } | TestFunction::Grid { .. } => None,
        }
    }

    /// `<grad f(x), y>`.
    pub fn directional_derivative(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        self.gradient(x).map(|g| g.iter().zip(y).map(|(a, b)| a * b).sum())
    }

    pub fn has_gradient(&self) -> bool {
        !matches!(self, TestFunction::IndicatorBox { .. } | TestFunction::Grid { .. })
    }

    /// Whether `f >= 0` everywhere.
    pub fn is_nonnegative(&self) -> bool {
        match self {
            TestFunction::Constant { value } => *value >= 0.0,
            TestFunction::Coordinate { .. } => false,
            TestFunction::Grid { values, .. } => values.iter().all(|v| *v >= 0.0),
            _ => true,
        }
    }

    /// Whether `f` is bounded on R^d.
    pub fn is_bounded(&self) -> bool {
        match self {
            TestFunction::Exponential { u } => u.iter().all(|v| *v == 0.0),
            TestFunction::Coordinate { .. } | TestFunction::Square { .. } => false,
            _ => true,
        }
    }

    /// `||f||_{L^alpha(R^d)}`.
    pub fn lp_norm(&self, alpha: f64, dim: usize) -> Result<f64> {
        match self {
            TestFunction::Constant { value } if *value == 0.0 => Ok(0.0),
            TestFunction::IndicatorBox { lower, upper } => {
                let vol: f64 = lower.iter().zip(upper).map(|(l, u)| u - l).product();
                Ok(vol.powf(1.0 / alpha))
            }
            TestFunction::SmoothBump { radius, .. } => {
                // radial: |S^{d-1}| r^d int_0^1 psi(s)^alpha s^{d-1} ds
                let d = dim as f64;
                let sphere = 2.0 * std::f64::consts::PI.powf(0.5 * d) / libm::tgamma(0.5 * d);
                let radial = simpson(
                    &|s: f64| {
                        if s >= 1.0 {
                            0.0
                        } else {
                            (alpha * (1.0 - 1.0 / (1.0 - s * s))).exp() * s.powf(d - 1.0)
                        }
                    },
                    0.0,
                    1.0,
                    1e-13,
                );
                Ok((sphere * radius.powf(d) * radial).powf(1.0 / alpha))
            }
            TestFunction::Grid {
                origin,
                spacing,
                shape,
                values,
            } => {
                let hi: Vec<f64> = origin
                    .iter()
                    .zip(spacing)
                    .zip(shape)
                    .map(|((o, h), n)| o + h * (*n - 1) as f64)
                    .collect();
                let v = adaptive_tensor(
                    &|x: &[f64]| grid_eval(origin, spacing, shape, values, x).abs().powf(alpha),
                    origin,
                    &hi,
                    &QuadratureParams {
                        rel_tol: 1e-5,
                        ..QuadratureParams::default()
                    },
                )?;
                Ok(v.powf(1.0 / alpha))
            }
            other => Err(Error::InvalidArgument(format!(
                "test function `{}` is not in L^alpha(R^d)",
                other.name()
            ))),
        }
    }
}

#[inline]
fn bump_radius_sq(x: &[f64], center: &[f64], radius: f64) -> f64 {
    x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (radius * radius)
}

fn grid_eval(origin: &[f64], spacing: &[f64], shape: &[usize], values: &[f64], x: &[f64]) -> f64 {
    let d = origin.len();
    let mut base = [0usize; 8];
    let mut frac = [0.0f64; 8];
    for i in 0..d {
        let u = (x[i] - origin[i]) / spacing[i];
        if !(u >= 0.0 && u <= (shape[i] - 1) as f64) {
            return 0.0;
        }
        let b = (u.floor() as usize).min(shape[i] - 2);
        base[i] = b;
        frac[i] = u - b as f64;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut flat = 0usize;
        for i in 0..d {
            let up = (corner >> i) & 1 == 1;
            w *= if up { frac[i] } else { 1.0 - frac[i] };
            flat = flat * shape[i] + base[i] + up as usize;
        }
        if w != 0.0 {
            acc += w * values[flat];
        }
    }
    acc
}

/// Space-time function `scale * 1_{[start, end]}(t) * spatial(x)` used by
/// the Krylov functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeFn {
    pub start: f64,
    pub end: f64,
    pub spatial: TestFunction,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl SpaceTimeFn {
    pub fn new(start: f64, end: f64, spatial: TestFunction) -> Self {
        Self {
            start,
            end,
            spatial,
            scale: 1.0,
        }
    }

    /// `[start, end] x [c - w, c + w]^d`.
    pub fn cube(start: f64, end: f64, center: &[f64], half_width: f64) -> Self {
        Self::new(
            start,
            end,
            TestFunction::IndicatorBox {
                lower: center.iter().map(|c| c - half_width).collect(),
                upper: center.iter().map(|c| c + half_width).collect(),
            },
        )
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.scale *= c;
        self
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        if t < self.start || t > self.end {
            0.0
        } else {
            self.scale * self.spatial.eval(x)
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.scale >= 0.0 && self.spatial.is_nonnegative()
    }

    /// `||f||_{L^beta_alpha(T)} = ( int_0^T ||f_t||_alpha^beta dt )^{1/beta}`.
    pub fn mixed_norm(&self, alpha: f64, beta: f64, horizon: f64, dim: usize) -> Result<f64> {
        self.mixed_norm_between(alpha, beta, 0.0, horizon, dim)
    }

    pub fn mixed_norm_between(&self, alpha: f64, beta: f64, from: f64, to: f64, dim: usize) -> Result<f64> {
        let len = (self.end.min(to) - self.start.max(from)).max(0.0);
        if len == 0.0 || self.scale == 0.0 {
            return Ok(0.0);
        }
        Ok(self.scale.abs() * self.spatial.lp_norm(alpha, dim)? * len.powf(1.0 / beta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(f: &TestFunction, x: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (f.eval(&a) - f.eval(&b)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradients_match_central_differences() {
        let fs = [
            TestFunction::Exponential { u: vec![0.3, -0.4] },
            TestFunction::Coordinate { index: 1 },
            TestFunction::Square { index: 0 },
            TestFunction::SmoothBump {
                center: vec![0.1, 0.2],
                radius: 1.5,
            },
        ];
        for f in &fs {
            for x in [[0.3, -0.2], [0.5, 0.9], [-0.4, 0.1]] {
                let g = f.gradient(&x).unwrap();
                let fd = fd_gradient(f, &x);
                for (a, b) in g.iter().zip(&fd) {
                    let scale = a.abs().max(b.abs()).max(1e-3);
                    assert!((a - b).abs() / scale <= 1e-6, "{f:?} at {x:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn constant_everywhere() {
        let f = TestFunction::constant(2.5);
        assert_eq!(f.eval(&[1e9]), 2.5);
        assert_eq!(f.gradient(&[3.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn bump_norm_1d_by_brute_force() {
        let f = TestFunction::SmoothBump {
            center: vec![0.0],
            radius: 0.7,
        };
        let n = 200_000;
        let h = 1.4 / n as f64;
        let brute: f64 = (0..n).map(|i| f.eval(&[-0.7 + (i as f64 + 0.5) * h]).powi(2) * h).sum();
        let v = f.lp_norm(2.0, 1).unwrap();
        assert!((v - brute.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn bump_norm_2d_by_tensor() {
        let f = TestFunction::SmoothBump {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let t = adaptive_tensor(
            &|x: &[f64]| f.eval(x).powi(3),
            &[-1.0, -1.0],
            &[1.0, 1.0],
            &QuadratureParams::default(),
        )
        .unwrap();
        assert!((f.lp_norm(3.0, 2).unwrap() - t.powf(1.0 / 3.0)).abs() < 1e-5);
    }

    #[test]
    fn mixed_norm_of_box() {
        let f = SpaceTimeFn::cube(0.0, 1.0, &[0.0], 1.0);
        assert!((f.mixed_norm(2.0, 2.0, 1.0, 1).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(f.mixed_norm_between(2.0, 2.0, 2.0, 3.0, 1).unwrap(), 0.0);
    }
}
