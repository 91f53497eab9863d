use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::quadrature::{adaptive_tensor, piecewise_simpson, QuadratureParams};
use crate::error::{Error, Result};

/// Rule used to evaluate a [`GridDrift`] between lattice nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Nearest,
    Multilinear,
}

/// Drift sampled on a regular space-time lattice.
///
/// In time the drift is piecewise constant from the left node. In space it
/// is interpolated inside the lattice box and vanishes outside it.
/// `values` is laid out time-major, then spatial nodes in row-major order
/// (last axis fastest), then the `d` components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDrift {
    pub times: Vec<f64>,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub interpolation: Interpolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum DriftFamily {
    Zero {
        dim: usize,
    },
    /// `b(x) = A x + c`.
    Lipschitz {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    /// `b = a 1_{[c1, c2]}`.
    IndicatorBox {
        amplitude: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// `b = a prod_i g_i(x_i)` where `g_i` ramps from 0 to 1 across each face
    /// with a smoothstep of width `width` centred on the face.
    MollifiedIndicator {
        amplitude: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        width: f64,
    },
    Grid(GridDrift),
}

impl DriftFamily {
    pub fn name(&self) -> &'static str {
        match self {
            DriftFamily::Zero { .. } => "zero",
            DriftFamily::Lipschitz { .. } => "lipschitz",
            DriftFamily::IndicatorBox { .. } => "indicator_box",
            DriftFamily::MollifiedIndicator { .. } => "mollified_indicator",
            DriftFamily::Grid(_) => "grid",
        }
    }
}

/// Closed-form norms of time-homogeneous families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticNorms {
    /// `||b_t||_p`, independent of `t`.
    pub space_norm: f64,
    /// `K(t)`, independent of `t`, when the family has one.
    pub modulus: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftConfig {
    #[serde(flatten)]
    pub family: DriftFamily,
    pub p: f64,
    pub q: f64,
}

/// A drift `b_t(x)` together with its integrability exponents `(p, q)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DriftConfig", into = "DriftConfig")]
pub struct DriftSpec {
    family: DriftFamily,
    dim: usize,
    p: f64,
    q: f64,
    analytic: Option<AnalyticNorms>,
    lipschitz_constant: Option<f64>,
}

impl TryFrom<DriftConfig> for DriftSpec {
    type Error = Error;

    fn try_from(c: DriftConfig) -> Result<Self> {
        DriftSpec::new(c.family, c.p, c.q)
    }
}

impl From<DriftSpec> for DriftConfig {
    fn from(s: DriftSpec) -> Self {
        DriftConfig {
            family: s.family,
            p: s.p,
            q: s.q,
        }
    }
}

impl DriftSpec {
    pub fn new(family: DriftFamily, p: f64, q: f64) -> Result<Self> {
        if !(p > 1.0 && q > 1.0) || !p.is_finite() || !q.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "integrability exponents must exceed 1, got p={p}, q={q}"
            )));
        }
        let dim = validate(&family)?;
        let mut spec = Self {
            family,
            dim,
            p,
            q,
            analytic: None,
            lipschitz_constant: None,
        };
        spec.analytic = spec.compute_analytic()?;
        if let DriftFamily::Lipschitz { matrix, .. } = &spec.family {
            let a = DMatrix::from_fn(dim, dim, |i, j| matrix[i][j]);
            let sv = a.singular_values();
            spec.lipschitz_constant = Some(sv.iter().copied().fold(0.0, f64::max));
        }
        Ok(spec)
    }

    pub fn zero(dim: usize, p: f64, q: f64) -> Result<Self> {
        Self::new(DriftFamily::Zero { dim }, p, q)
    }

    pub fn indicator_box(amplitude: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>, p: f64, q: f64) -> Result<Self> {
        Self::new(
            DriftFamily::IndicatorBox {
                amplitude,
                lower,
                upper,
            },
            p,
            q,
        )
    }

    pub fn mollified_indicator(
        amplitude: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        width: f64,
        p: f64,
        q: f64,
    ) -> Result<Self> {
        Self::new(
            DriftFamily::MollifiedIndicator {
                amplitude,
                lower,
                upper,
                width,
            },
            p,
            q,
        )
    }

    pub fn family(&self) -> &DriftFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn analytic_norms(&self) -> Option<AnalyticNorms> {
        self.analytic
    }

    /// Operator norm of the linear part for the Lipschitz family.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        self.lipschitz_constant
    }

    pub fn is_zero(&self) -> bool {
        match &self.family {
            DriftFamily::Zero { .. } => true,
            DriftFamily::Lipschitz { matrix, offset } => {
                matrix.iter().flatten().all(|v| *v == 0.0) && offset.iter().all(|v| *v == 0.0)
            }
            DriftFamily::IndicatorBox { amplitude, .. } | DriftFamily::MollifiedIndicator { amplitude, .. } => {
                amplitude.iter().all(|v| *v == 0.0)
            }
            DriftFamily::Grid(g) => g.values.iter().all(|v| *v == 0.0),
        }
    }

    pub fn is_time_homogeneous(&self) -> bool {
        match &self.family {
            DriftFamily::Grid(g) => g.times.len() == 1,
            _ => true,
        }
    }

    /// `b_t(x)`.
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
        }
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, x, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation into `out`; `x` and `out` must have length `dim`.
    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.family {
            DriftFamily::Zero { .. } => out.fill(0.0),
            DriftFamily::Lipschitz { matrix, offset } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = offset[i] + matrix[i].iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
                }
            }
            DriftFamily::IndicatorBox {
                amplitude,
                lower,
                upper,
            } => {
                let inside = x
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .all(|(v, (l, u))| *l <= *v && *v <= *u);
                if inside {
                    out.copy_from_slice(amplitude);
                } else {
                    out.fill(0.0);
                }
            }
            DriftFamily::MollifiedIndicator {
                amplitude,
                lower,
                upper,
                width,
            } => {
                let s = mollifier_profile(x, lower, upper, *width);
                for (o, a) in out.iter_mut().zip(amplitude) {
                    *o = a * s;
                }
            }
            DriftFamily::Grid(g) => g.eval_into(t, x, out),
        }
    }

    /// Axis-aligned box outside of which `b_t` vanishes, when it has one.
    pub fn support(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.family {
            DriftFamily::Zero { .. } | DriftFamily::Lipschitz { .. } => None,
            DriftFamily::IndicatorBox { lower, upper, .. } => Some((lower.clone(), upper.clone())),
            DriftFamily::MollifiedIndicator {
                lower, upper, width, ..
            } => Some((
                lower.iter().map(|l| l - 0.5 * width).collect(),
                upper.iter().map(|u| u + 0.5 * width).collect(),
            )),
            DriftFamily::Grid(g) => Some(g.bounds()),
        }
    }

    /// Centre of the support box, or the origin.
    pub fn center(&self) -> Vec<f64> {
        match self.support() {
            Some((lo, hi)) => lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            None => vec![0.0; self.dim],
        }
    }

    fn compute_analytic(&self) -> Result<Option<AnalyticNorms>> {
        let p = self.p;
        let norms = match &self.family {
            DriftFamily::Zero { .. } => AnalyticNorms {
                space_norm: 0.0,
                modulus: Some(0.0),
            },
            DriftFamily::Lipschitz { .. } => {
                if self.is_zero() {
                    AnalyticNorms {
                        space_norm: 0.0,
                        modulus: Some(0.0),
                    }
                } else {
                    AnalyticNorms {
                        space_norm: f64::INFINITY,
                        modulus: None,
                    }
                }
            }
            DriftFamily::IndicatorBox {
                amplitude,
                lower,
                upper,
            } => {
                let vol: f64 = lower.iter().zip(upper).map(|(l, u)| u - l).product();
                let amp = euclid(amplitude);
                AnalyticNorms {
                    space_norm: amp * vol.powf(1.0 / p),
                    modulus: if amp == 0.0 || vol == 0.0 { Some(0.0) } else { None },
                }
            }
            DriftFamily::MollifiedIndicator {
                amplitude,
                lower,
                upper,
                width,
            } => {
                let amp = euclid(amplitude);
                let mass: f64 = lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| profile_power_integral(*l, *u, *width, p))
                    .product();
                let modulus = amp * mollified_gradient_norm(lower, upper, *width, p)?;
                AnalyticNorms {
                    space_norm: amp * mass.powf(1.0 / p),
                    modulus: Some(modulus),
                }
            }
            DriftFamily::Grid(_) => return Ok(None),
        };
        Ok(Some(norms))
    }
}

fn validate(family: &DriftFamily) -> Result<usize> {
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    match family {
        DriftFamily::Zero { dim } => {
            if *dim == 0 {
                return Err(Error::InvalidArgument("dimension must be positive".into()));
            }
            Ok(*dim)
        }
        DriftFamily::Lipschitz { matrix, offset } => {
            let d = offset.len();
            if d == 0 || matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
                return Err(Error::InvalidArgument(
                    "lipschitz drift needs a square d x d matrix and a d-vector offset".into(),
                ));
            }
            if !finite(offset) || matrix.iter().any(|r| !finite(r)) {
                return Err(Error::InvalidArgument("non-finite lipschitz coefficients".into()));
            }
            Ok(d)
        }
        DriftFamily::IndicatorBox {
            amplitude,
            lower,
            upper,
        }
        | DriftFamily::MollifiedIndicator {
            amplitude,
            lower,
            upper,
            ..
        } => {
            let d = amplitude.len();
            if d == 0 || lower.len() != d || upper.len() != d {
                return Err(Error::InvalidArgument(
                    "amplitude and box corners must share a positive dimension".into(),
                ));
            }
            if !finite(amplitude) || !finite(lower) || !finite(upper) {
                return Err(Error::InvalidArgument("non-finite box parameters".into()));
            }
            if lower.iter().zip(upper).any(|(l, u)| l > u) {
                return Err(Error::InvalidArgument("box corners must satisfy c1 <= c2".into()));
            }
            if let DriftFamily::MollifiedIndicator { width, .. } = family {
                if !(*width > 0.0) || !width.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "smoothing width must be positive, got {width}"
                    )));
                }
            }
            Ok(d)
        }
        DriftFamily::Grid(g) => g.validate(),
    }
}

pub(crate) fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * (3.0 - 2.0 * u)
    }
}

#[inline]
fn smoothstep_slope(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        6.0 * u * (1.0 - u)
    }
}

/// One-dimensional factor `g(x)` of the mollified indicator of `[lo, hi]`.
#[inline]
pub(crate) fn ramp(x: f64, lo: f64, hi: f64, width: f64) -> f64 {
    smoothstep((x - lo) / width + 0.5) * smoothstep((hi - x) / width + 0.5)
}

#[inline]
fn ramp_slope(x: f64, lo: f64, hi: f64, width: f64) -> f64 {
    let u1 = (x - lo) / width + 0.5;
    let u2 = (hi - x) / width + 0.5;
    (smoothstep_slope(u1) * smoothstep(u2) - smoothstep(u1) * smoothstep_slope(u2)) / width
}

fn mollifier_profile(x: &[f64], lower: &[f64], upper: &[f64], width: f64) -> f64 {
    let mut s = 1.0;
    for ((v, l), u) in x.iter().zip(lower).zip(upper) {
        s *= ramp(*v, *l, *u, width);
        if s == 0.0 {
            break;
        }
    }
    s
}

fn ramp_breaks(lo: f64, hi: f64, width: f64) -> [f64; 4] {
    [lo - 0.5 * width, lo + 0.5 * width, hi - 0.5 * width, hi + 0.5 * width]
}

/// `int g(x)^p dx` for one axis.
fn profile_power_integral(lo: f64, hi: f64, width: f64, p: f64) -> f64 {
    piecewise_simpson(&|x| ramp(x, lo, hi, width).powf(p), &ramp_breaks(lo, hi, width), 1e-13)
}

/// `||grad(prod_i g_i)||_p` for a unit amplitude.
fn mollified_gradient_norm(lower: &[f64], upper: &[f64], width: f64, p: f64) -> Result<f64> {
    if lower.len() == 1 {
        let (lo, hi) = (lower[0], upper[0]);
        if hi - lo >= width {
            // two disjoint ramps: 2 eps^{1-p} int_0^1 (6v(1-v))^p dv
            let beta = (2.0 * libm::lgamma(p + 1.0) - libm::lgamma(2.0 * p + 2.0)).exp();
            return Ok((2.0 * width.powf(1.0 - p) * 6f64.powf(p) * beta).powf(1.0 / p));
        }
        let v = piecewise_simpson(
            &|x| ramp_slope(x, lo, hi, width).abs().powf(p),
            &ramp_breaks(lo, hi, width),
            1e-13,
        );
        return Ok(v.powf(1.0 / p));
    }
    let d = lower.len();
    let lo: Vec<f64> = lower.iter().map(|l| l - 0.5 * width).collect();
    let hi: Vec<f64> = upper.iter().map(|u| u + 0.5 * width).collect();
    let integrand = |x: &[f64]| {
        let vals: Vec<f64> = (0..d).map(|i| ramp(x[i], lower[i], upper[i], width)).collect();
        let mut sq = 0.0;
        for j in 0..d {
            let mut partial = ramp_slope(x[j], lower[j], upper[j], width);
            for (i, v) in vals.iter().enumerate() {
                if i != j {
                    partial *= v;
                }
            }
            sq += partial * partial;
        }
        sq.sqrt().powf(p)
    };
    let params = QuadratureParams {
        rel_tol: 1e-5,
        ..QuadratureParams::default()
    };
    Ok(adaptive_tensor(&integrand, &lo, &hi, &params)?.powf(1.0 / p))
}

impl GridDrift {
    fn validate(&self) -> Result<usize> {
        let d = self.origin.len();
        if d == 0 || self.spacing.len() != d || self.shape.len() != d {
            return Err(Error::InvalidArgument(
                "grid origin, spacing and shape must share a positive dimension".into(),
            ));
        }
        if self.times.is_empty() || self.times[0] != 0.0 {
            return Err(Error::InvalidArgument("grid times must start at 0".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("grid times must increase".into()));
        }
        if self.spacing.iter().any(|h| !(*h > 0.0)) || self.shape.iter().any(|n| *n < 2) {
            return Err(Error::InvalidArgument(
                "grid needs positive spacing and at least two nodes per axis".into(),
            ));
        }
        let expected = self.times.len() * self.shape.iter().product::<usize>() * d;
        if self.values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "grid holds {} values, expected {expected}",
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("grid has non-finite values".into()));
        }
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let hi = self
            .origin
            .iter()
            .zip(&self.spacing)
            .zip(&self.shape)
            .map(|((o, h), n)| o + h * (*n - 1) as f64)
            .collect();
        (self.origin.clone(), hi)
    }

    fn time_slice(&self, t: f64) -> usize {
        self.times.partition_point(|s| *s <= t).saturating_sub(1)
    }

    fn node_values(&self, slice: usize, flat: usize) -> &[f64] {
        let d = self.dim();
        let per_slice = self.shape.iter().product::<usize>() * d;
        let start = slice * per_slice + flat * d;
        &self.values[start..start + d]
    }

    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out.fill(0.0);
        let slice = self.time_slice(t);
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for i in 0..d {
            let u = (x[i] - self.origin[i]) / self.spacing[i];
            let last = (self.shape[i] - 1) as f64;
            if !(u >= 0.0 && u <= last) {
                return;
            }
            match self.interpolation {
                Interpolation::Nearest => {
                    base[i] = u.round() as usize;
                    frac[i] = 0.0;
                }
                Interpolation::Multilinear => {
                    let b = (u.floor() as usize).min(self.shape[i] - 2);
                    base[i] = b;
                    frac[i] = u - b as f64;
                }
            }
        }
        let corners = match self.interpolation {
            Interpolation::Nearest => 1,
            Interpolation::Multilinear => 1usize << d,
        };
        for corner in 0..corners {
            let mut w = 1.0;
            let mut flat = 0usize;
            for i in 0..d {
                let up = (corner >> i) & 1 == 1;
                let idx = base[i] + up as usize;
                w *= if up { frac[i] } else { 1.0 - frac[i] };
                flat = flat * self.shape[i] + idx;
            }
            if w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.node_values(slice, flat)) {
                *o += w * v;
            }
        }
    }

    /// Exact `||b_t||_p^p` for nearest-node interpolation: each node owns
    /// a cell clipped to the lattice box.
    fn nearest_power_integral(&self, slice: usize, p: f64) -> f64 {
        let d = self.dim();
        let count: usize = self.shape.iter().product();
        let mut total = 0.0;
        for flat in 0..count {
            let mut rem = flat;
            let mut vol = 1.0;
            for i in (0..d).rev() {
                let idx = rem % self.shape[i];
                rem /= self.shape[i];
                let edge = idx == 0 || idx == self.shape[i] - 1;
                vol *= self.spacing[i] * if edge { 0.5 } else { 1.0 };
            }
            total += vol * euclid(self.node_values(slice, flat)).powf(p);
        }
        total
    }
}

/// Spatial norm `||b_t||_p`.
pub fn space_norm(spec: &DriftSpec, t: f64, quad: &QuadratureParams) -> Result<f64> {
    if let Some(a) = spec.analytic {
        return Ok(a.space_norm);
    }
    let DriftFamily::Grid(g) = &spec.family else {
        unreachable!("only grid drifts lack closed forms")
    };
    let p = spec.p;
    let slice = g.time_slice(t);
    let integral = match g.interpolation {
        Interpolation::Nearest => g.nearest_power_integral(slice, p),
        Interpolation::Multilinear => {
            let (lo, hi) = g.bounds();
            let tt = g.times[slice];
            adaptive_tensor(
                &|x: &[f64]| {
                    let mut b = vec![0.0; x.len()];
                    g.eval_into(tt, x, &mut b);
                    euclid(&b).powf(p)
                },
                &lo,
                &hi,
                quad,
            )?
        }
    };
    Ok(integral.powf(1.0 / p))
}
