use serde::{Deserialize, Serialize};

use super::constants::{
    beta_constant, beta_lipschitz, harnack_admissible, harnack_factor, shift_lambda, shift_log_constant_i,
    shift_log_constant_ii, shift_power_exponent_i, smallness_coefficient, weight_moment_rhs,
};
use super::report::{CheckName, ConstantsUsed, GammaRecord, InequalityReport, KappaSource, Verdict};
use crate::coupling::CouplingKind;
use crate::error::{Error, Result};
use crate::estimate::{
    khasminskii_gamma, krylov_functional, mc_semigroup, sample_coupled, sample_terminals, weight_moment_from_batch,
    KrylovExponents, KrylovParams, McEstimate, Scenario, SpaceTimeFn, TestFunction,
};
use crate::model::{lqp_norm, lqp_norm_between, modulus_norms, QuadratureParams};

/// Values of `f` below this are raised to it before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftVariant {
    /// Constants from `||b||_{L^q_p}` alone.
    I,
    /// Constants from the translation modulus `K`, as in the two-point case.
    Ii,
}

/// A scenario together with the Krylov constant every check shares.
#[derive(Debug, Clone)]
pub struct VerifyContext {
    pub scenario: Scenario,
    pub kappa: f64,
    pub kappa_source: KappaSource,
    pub quad: QuadratureParams,
}

impl VerifyContext {
    pub fn new(scenario: Scenario, kappa: f64, kappa_source: KappaSource) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "kappa must be positive and finite, got {kappa}"
            )));
        }
        Ok(Self {
            scenario,
            kappa,
            kappa_source,
            quad: QuadratureParams::default(),
        })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            scenario: self.scenario.with_seed(seed),
            ..self.clone()
        }
    }

    fn horizon(&self) -> f64 {
        self.scenario.horizon()
    }

    fn delta(&self) -> f64 {
        self.scenario.diffusion.delta()
    }

    /// Everything available without a power `p`.
    pub fn constants(&self) -> Result<ConstantsUsed> {
        let drift = &self.scenario.drift;
        let t = self.horizon();
        let k = modulus_norms(drift, t);
        let b = lqp_norm(drift, t, &self.quad)?;
        let lipschitz = drift.lipschitz_constant();
        let beta = match (k, lipschitz) {
            (Some(k), _) => Some(beta_constant(t, k.lq, self.delta(), self.kappa)?),
            (None, Some(l)) => Some(beta_lipschitz(t, l, self.delta())?),
            (None, None) => None,
        };
        Ok(ConstantsUsed {
            beta,
            kappa: self.kappa,
            kappa_source: self.kappa_source,
            delta: self.delta(),
            k_lq_norm: k.map(|k| k.lq),
            k_squared_2q_norm: k.map(|k| k.squared_2q),
            lipschitz,
            b_norm: b.is_finite().then_some(b),
            p: None,
            horizon: t,
            factor: None,
            log_factor: None,
            threshold: None,
            gamma: None,
        })
    }

    fn beta(&self, c: &ConstantsUsed) -> Result<f64> {
        c.beta.ok_or(Error::MissingModulus(self.scenario.drift.family().name()))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn check_dim(ctx: &VerifyContext, v: &[f64]) -> Result<()> {
    let d = ctx.scenario.dim();
    if v.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: v.len(),
        });
    }
    Ok(())
}

fn require_nonnegative(f: &TestFunction) -> Result<()> {
    if !f.is_nonnegative() {
        return Err(Error::InvalidArgument(format!(
            "test function `{}` must be nonnegative",
            f.name()
        )));
    }
    Ok(())
}

/// `m^p` with delta-method stderr.
fn power(e: &McEstimate, p: f64) -> McEstimate {
    e.map_delta(e.mean.powf(p), p * e.mean.powf(p - 1.0))
}

/// Notes recording both modulus norms when they differ.
fn modulus_note(c: &ConstantsUsed) -> Option<String> {
    match (c.k_lq_norm, c.k_squared_2q_norm) {
        (Some(a), Some(b)) if (a * a - b).abs() > 1e-12 * b.abs().max(1.0) => Some(format!(
            "beta uses ||K||^2_{{L^q}} = {}; (int K^{{2q}})^{{1/q}} = {b}",
            a * a
        )),
        _ => None,
    }
}

fn finish(mut r: InequalityReport, c_note: Option<String>) -> InequalityReport {
    if let Some(n) = c_note {
        r.notes.push(n);
    }
    r
}

/// `(P_T f)^p(y) <= P_T f^p(x) * factor`.
pub fn check_harnack(ctx: &VerifyContext, f: &TestFunction, x: &[f64], y: &[f64], p: f64) -> Result<InequalityReport> {
    check_dim(ctx, x)?;
    check_dim(ctx, y)?;
    require_nonnegative(f)?;
    f.validate(ctx.scenario.dim())?;
    let mut c = ctx.constants()?;
    let beta = ctx.beta(&c)?;
    let (admissible, threshold) = harnack_admissible(x, y, p, beta)?;
    c.p = Some(p);
    c.threshold = Some(threshold);
    let seed = ctx.scenario.seed;
    let note = modulus_note(&c);
    if !admissible {
        return Ok(finish(
            InequalityReport::not_admissible(
                CheckName::Harnack,
                c,
                seed,
                format!("|x-y|^2 = {} is not below {threshold}", dist(x, y).powi(2)),
            ),
            note,
        ));
    }
    let factor = harnack_factor(p, beta, dist(x, y))?;
    c.factor = Some(factor);
    c.log_factor = Some(factor.ln());
    let at_y = sample_terminals(&ctx.scenario, y)?.average(|pt| f.eval(pt));
    let at_x = sample_terminals(&ctx.scenario, x)?.average(|pt| f.eval(pt).powf(p));
    let lhs = power(&at_y, p);
    let rhs = at_x.scaled(factor);
    Ok(finish(
        InequalityReport::compared(CheckName::Harnack, lhs, rhs, c, seed),
        note,
    ))
}

/// `(E R^{p/(p-1)})^2 <= 1 / (1 - (2p+2) beta |x-y|^2 / (p-1)^2)`.
pub fn check_weight_moment_bound(ctx: &VerifyContext, x: &[f64], y: &[f64], p: f64) -> Result<InequalityReport> {
    check_dim(ctx, x)?;
    check_dim(ctx, y)?;
    let mut c = ctx.constants()?;
    let beta = ctx.beta(&c)?;
    let (admissible, threshold) = harnack_admissible(x, y, p, beta)?;
    c.p = Some(p);
    c.threshold = Some(threshold);
    let seed = ctx.scenario.seed;
    let note = modulus_note(&c);
    if !admissible {
        return Ok(finish(
            InequalityReport::not_admissible(
                CheckName::WeightMomentBound,
                c,
                seed,
                format!("|x-y|^2 = {} is not below {threshold}", dist(x, y).powi(2)),
            ),
            note,
        ));
    }
    let bound = weight_moment_rhs(p, beta, dist(x, y))?;
    c.factor = Some(bound);
    c.log_factor = Some(bound.ln());
    let kind = CouplingKind::Harnack {
        x: x.to_vec(),
        y: y.to_vec(),
    };
    let m = weight_moment_from_batch(&sample_coupled(&ctx.scenario, &kind)?, p)?;
    let lhs = power(&m, 2.0);
    let rhs = McEstimate::exact(bound);
    Ok(finish(
        InequalityReport::compared(CheckName::WeightMomentBound, lhs, rhs, c, seed),
        note,
    ))
}

/// Weighted estimate through the coupling against the direct estimate of
/// the same quantity: `P_T f(y)` for Harnack, `P_T f(x)` for Shift.
pub fn check_girsanov_consistency(
    ctx: &VerifyContext,
    f: &TestFunction,
    kind: &CouplingKind,
) -> Result<InequalityReport> {
    check_dim(ctx, kind.start())?;
    check_dim(ctx, kind.other())?;
    f.validate(ctx.scenario.dim())?;
    let c = ctx.constants()?;
    let seed = ctx.scenario.seed;
    let target = match kind {
        CouplingKind::Harnack { y, .. } => y.as_slice(),
        CouplingKind::Shift { x, .. } => x.as_slice(),
    };
    let weighted = sample_coupled(&ctx.scenario, kind)?.weighted_average(|pt| f.eval(pt));
    let direct = mc_semigroup(f, &ctx.scenario, target)?;
    let mut r = InequalityReport::compared(CheckName::GirsanovConsistency, weighted, direct, c, seed);
    let m = r.margin.expect("compared reports carry a margin");
    r.verdict = Verdict::from_difference(m.value, m.stderr);
    let tag = match kind {
        CouplingKind::Harnack { .. } => "harnack coupling",
        CouplingKind::Shift { .. } => "shift coupling",
    };
    Ok(r.with_note(tag))
}

/// `P_T log f(x) <= log P_T f(. + y)(x) + C`, with `f` floored at 1e-12.
pub fn check_shift_log_harnack(
    ctx: &VerifyContext,
    f: &TestFunction,
    variant: ShiftVariant,
    x: &[f64],
    y: &[f64],
) -> Result<InequalityReport> {
    check_dim(ctx, x)?;
    check_dim(ctx, y)?;
    require_nonnegative(f)?;
    f.validate(ctx.scenario.dim())?;
    let mut c = ctx.constants()?;
    let seed = ctx.scenario.seed;
    let y_norm = norm(y);
    let (name, constant) = match variant {
        ShiftVariant::I => {
            let Some(b) = c.b_norm else {
                return Ok(InequalityReport::not_admissible(
                    CheckName::ShiftLogHarnackI,
                    c,
                    seed,
                    "||b||_{L^q_p(T)} is infinite".into(),
                ));
            };
            (
                CheckName::ShiftLogHarnackI,
                shift_log_constant_i(ctx.delta(), y_norm, ctx.horizon(), ctx.kappa, b),
            )
        }
        ShiftVariant::Ii => (
            CheckName::ShiftLogHarnackIi,
            shift_log_constant_ii(ctx.beta(&c)?, y_norm),
        ),
    };
    c.factor = Some(constant);
    let batch = sample_terminals(&ctx.scenario, x)?;
    let floored = std::sync::atomic::AtomicUsize::new(0);
    let lhs = batch.average(|pt| {
        let v = f.eval(pt);
        if v < LOG_FLOOR {
            floored.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        }
        v.max(LOG_FLOOR).ln()
    });
    let shifted = batch.average(|pt| {
        let moved: Vec<f64> = pt.iter().zip(y).map(|(a, b)| a + b).collect();
        f.eval(&moved).max(LOG_FLOOR)
    });
    let rhs = shifted.map_delta(shifted.mean.ln() + constant, 1.0 / shifted.mean);
    let mut r = InequalityReport::compared(name, lhs, rhs, c, seed);
    let floored = floored.into_inner();
    if floored > 0 {
        r.notes.push(format!("f floored at {LOG_FLOOR:e} on {floored} samples"));
    }
    Ok(r)
}

/// Variant (i) gamma: Khasminskii splitting of `4 |b|^2` under Krylov
/// exponents `(p_b/2, q_b/2)` with `lambda = (p+1) delta / (p-1)^2`.
pub fn shift_gamma(ctx: &VerifyContext, p: f64) -> Result<GammaRecord> {
    let drift = &ctx.scenario.drift;
    let exponents = KrylovExponents::from_drift_exponents(drift.p(), drift.q(), drift.dim())?;
    let lambda = shift_lambda(p, ctx.delta());
    let params = KrylovParams::new(exponents, ctx.kappa, lambda, 1.0)?;
    let quad = ctx.quad;
    let g = khasminskii_gamma(&params, ctx.horizon(), |s, t| {
        Ok(4.0 * lqp_norm_between(drift, s, t, &quad)?.powi(2))
    })?;
    Ok(GammaRecord {
        gamma: g.gamma.is_finite().then_some(g.gamma),
        log_gamma: g.log_gamma,
        pieces: g.pieces,
        lambda,
        total_load: g.total_load,
    })
}

/// `(P_T f)^p(x) <= P_T f^p(. + y)(x) * factor`.
pub fn check_shift_harnack(
    ctx: &VerifyContext,
    f: &TestFunction,
    variant: ShiftVariant,
    p: f64,
    x: &[f64],
    y: &[f64],
) -> Result<InequalityReport> {
    check_dim(ctx, x)?;
    check_dim(ctx, y)?;
    require_nonnegative(f)?;
    f.validate(ctx.scenario.dim())?;
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("power needs p > 1, got {p}")));
    }
    let mut c = ctx.constants()?;
    c.p = Some(p);
    let seed = ctx.scenario.seed;
    let y_norm = norm(y);
    let (name, log_factor) = match variant {
        ShiftVariant::I => {
            if c.b_norm.is_none() {
                return Ok(InequalityReport::not_admissible(
                    CheckName::ShiftPowerHarnackI,
                    c,
                    seed,
                    "||b||_{L^q_p(T)} is infinite".into(),
                ));
            }
            let g = shift_gamma(ctx, p)?;
            let lf = g.log_gamma + shift_power_exponent_i(p, ctx.delta(), y_norm, ctx.horizon());
            c.gamma = Some(g);
            (CheckName::ShiftPowerHarnackI, lf)
        }
        ShiftVariant::Ii => {
            let beta = ctx.beta(&c)?;
            let threshold = 1.0 / smallness_coefficient(p, beta);
            c.threshold = Some(threshold);
            if !(y_norm * y_norm < threshold) {
                return Ok(InequalityReport::not_admissible(
                    CheckName::ShiftPowerHarnackIi,
                    c,
                    seed,
                    format!("|y|^2 = {} is not below {threshold}", y_norm * y_norm),
                ));
            }
            (CheckName::ShiftPowerHarnackIi, harnack_factor(p, beta, y_norm)?.ln())
        }
    };
    let factor = log_factor.exp();
    c.log_factor = Some(log_factor);
    c.factor = factor.is_finite().then_some(factor);
    let batch = sample_terminals(&ctx.scenario, x)?;
    let lhs = power(&batch.average(|pt| f.eval(pt)), p);
    let shifted = batch.average(|pt| {
        let moved: Vec<f64> = pt.iter().zip(y).map(|(a, b)| a + b).collect();
        f.eval(&moved).powf(p)
    });
    if !factor.is_finite() {
        // the bound is +inf: nothing to compare, holds trivially
        let mut r = InequalityReport::compared(name, lhs, shifted, c, seed);
        r.rhs = None;
        r.margin = None;
        r.verdict = Verdict::Holds;
        return Ok(r.with_note(format!("factor exp({log_factor}) exceeds the f64 range")));
    }
    let rhs = shifted.scaled(factor);
    Ok(InequalityReport::compared(name, lhs, rhs, c, seed))
}

/// `E int_0^T f(r, X_r) dr <= kappa ||f||_{L^beta_alpha(T)}`.
pub fn check_krylov(
    ctx: &VerifyContext,
    f: &SpaceTimeFn,
    x: &[f64],
    exponents: KrylovExponents,
) -> Result<InequalityReport> {
    check_dim(ctx, x)?;
    let c = ctx.constants()?;
    let v = krylov_functional(f, &ctx.scenario, x, exponents)?;
    let rhs = McEstimate::exact(ctx.kappa * v.norm);
    Ok(
        InequalityReport::compared(CheckName::KrylovBound, v.functional, rhs, c, ctx.scenario.seed).with_note(format!(
            "alpha={}, beta={}, ||f||={}",
            exponents.alpha, exponents.beta, v.norm
        )),
    )
}

/// `|P_T <grad f, y>(x)|^2 <= 2 beta (P_T f^2(x) - (P_T f)^2(x))` on
/// common paths.
pub fn check_variance_gradient(
    ctx: &VerifyContext,
    f: &TestFunction,
    x: &[f64],
    y: &[f64],
) -> Result<InequalityReport> {
    check_dim(ctx, x)?;
    check_dim(ctx, y)?;
    f.validate(ctx.scenario.dim())?;
    if !f.has_gradient() {
        return Err(Error::InvalidArgument(format!(
            "test function `{}` has no gradient",
            f.name()
        )));
    }
    let mut c = ctx.constants()?;
    let beta = ctx.beta(&c)?;
    c.factor = Some(2.0 * beta);
    let batch = sample_terminals(&ctx.scenario, x)?;
    let grad = batch.average(|pt| f.directional_derivative(pt, y).expect("gradient checked above"));
    let mean = batch.average(|pt| f.eval(pt));
    let second = batch.average(|pt| f.eval(pt).powi(2));
    // influence function of m2 - m1^2 gives its stderr
    let influence = batch.average(|pt| {
        let v = f.eval(pt);
        v * v - 2.0 * mean.mean * v
    });
    let variance = second.mean - mean.mean * mean.mean;
    let rhs = influence.map_delta(2.0 * beta * variance, 2.0 * beta);
    let lhs = power(&grad, 2.0);
    Ok(InequalityReport::compared(
        CheckName::VarianceGradient,
        lhs,
        rhs,
        c,
        ctx.scenario.seed,
    ))
}

/// Hoelder chain: consistency of the weighted estimator and the moment
/// bound together force the two-point inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofChain {
    pub premises_hold: bool,
    pub conclusion_holds: bool,
    pub implication_holds: bool,
}

pub fn proof_chain(
    girsanov: &InequalityReport,
    weight_bound: &InequalityReport,
    harnack: &InequalityReport,
) -> ProofChain {
    let premises_hold = girsanov.verdict.is_ok() && weight_bound.verdict.is_ok();
    let conclusion_holds = harnack.verdict.is_ok();
    ProofChain {
        premises_hold,
        conclusion_holds,
        implication_holds: !premises_hold || conclusion_holds,
    }
}
