use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{CheckSpec, ExperimentConfig, KappaConfig, SweepParameter, SweepSpec};
use super::dump::write_paths;
use super::svg::{render, Panel, Series};
use crate::error::{Error, Result};
use crate::estimate::{default_probes, default_starts, estimate_kappa, KappaEstimate, KrylovExponents, Scenario};
use crate::model::{check_hypotheses, HypothesisReport, QuadratureParams};
use crate::paths::TimeGrid;
use crate::seeding::{derive_seed, hash_hex};
use crate::verify::report::{fmt_f64, opt};
use crate::verify::{
    check_girsanov_consistency, check_harnack, check_krylov, check_shift_harnack, check_shift_log_harnack,
    check_variance_gradient, check_weight_moment_bound, harnack_factor, proof_chain, reports_to_csv, weight_moment_rhs,
    CheckName, InequalityReport, KappaSource, ProofChain, ShiftVariant, Verdict, VerifyContext,
};

/// Paths written by `--dump-paths`.
pub const DUMPED_PATHS: usize = 256;

const KAPPA_CAVEAT: &str = "kappa is an empirical maximum over a finite probe family inflated by 1.2; \
                            it may underestimate the constant for adversarial test functions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRecord {
    pub value: f64,
    pub source: KappaSource,
    pub horizon: f64,
    pub estimate: Option<KappaEstimate>,
    pub caveat: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub harnack: usize,
    pub weight_moment_bound: usize,
    pub girsanov_consistency: usize,
    pub chain: ProofChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    /// Formula value of the factor (or bound) at this grid point; `None`
    /// when infinite or not defined for the check.
    pub factor: Option<f64>,
    pub report: InequalityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub name: String,
    pub parameter: SweepParameter,
    pub check: CheckName,
    /// Largest admissible value of the swept parameter, when it has one.
    pub threshold: Option<f64>,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Full,
    Hypotheses,
    Kappa,
    Verify(CheckName),
    Sweep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool: String,
    pub version: String,
    /// Unix seconds; the only field that differs between reruns.
    pub timestamp: u64,
    pub config_hash: String,
    pub seed: u64,
    pub n_samples: usize,
    pub n_steps: usize,
    pub horizon: f64,
    pub hypotheses: HypothesisReport,
    pub kappa: Option<KappaRecord>,
    pub checks: Vec<InequalityReport>,
    pub proof_chains: Vec<ChainRecord>,
    pub sweeps: Vec<SweepResult>,
    pub violated: Vec<String>,
    pub exit_status: i32,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub exit_status: i32,
    pub files: Vec<PathBuf>,
}

pub fn provide_kappa(cfg: &ExperimentConfig, horizon: f64) -> Result<KappaRecord> {
    match cfg.kappa {
        KappaConfig::Value(v) => Ok(KappaRecord {
            value: v,
            source: KappaSource::Given,
            horizon,
            estimate: None,
            caveat: None,
        }),
        KappaConfig::Provider(_) => {
            let scenario = Scenario::new(
                cfg.drift.clone(),
                cfg.diffusion.clone(),
                TimeGrid::new(horizon, cfg.n_steps)?,
                cfg.kappa_samples.unwrap_or(cfg.n_samples),
                derive_seed(cfg.seed, "kappa"),
            );
            let center = cfg.drift.center();
            let est = estimate_kappa(
                &scenario,
                cfg.exponents()?,
                &default_probes(horizon, &center),
                &default_starts(&center),
            )?;
            if !(est.kappa > 0.0) {
                return Err(Error::Domain(
                    "estimated kappa is zero; every probe had zero occupation".into(),
                ));
            }
            Ok(KappaRecord {
                value: est.kappa,
                source: KappaSource::Estimated,
                horizon,
                estimate: Some(est),
                caveat: Some(KAPPA_CAVEAT.into()),
            })
        }
    }
}

/// Run one configured check in `ctx`.
pub fn run_check(ctx: &VerifyContext, spec: &CheckSpec, exponents: KrylovExponents) -> Result<InequalityReport> {
    fn need<T>(v: Option<T>, what: &str) -> Result<T> {
        v.ok_or_else(|| Error::InvalidArgument(format!("check needs {what}")))
    }
    let x = spec.x.as_slice();
    let r = match spec.check {
        CheckName::Harnack => check_harnack(
            ctx,
            need(spec.f.as_ref(), "f")?,
            x,
            need(spec.y.as_deref(), "y")?,
            need(spec.p, "p")?,
        )?,
        CheckName::WeightMomentBound => {
            check_weight_moment_bound(ctx, x, need(spec.y.as_deref(), "y")?, need(spec.p, "p")?)?
        }
        CheckName::GirsanovConsistency => {
            check_girsanov_consistency(ctx, need(spec.f.as_ref(), "f")?, &spec.coupling_kind())?
        }
        CheckName::ShiftLogHarnackI | CheckName::ShiftLogHarnackIi => {
            let variant = if spec.check == CheckName::ShiftLogHarnackI {
                ShiftVariant::I
            } else {
                ShiftVariant::Ii
            };
            check_shift_log_harnack(
                ctx,
                need(spec.f.as_ref(), "f")?,
                variant,
                x,
                need(spec.y.as_deref(), "y")?,
            )?
        }
        CheckName::ShiftPowerHarnackI | CheckName::ShiftPowerHarnackIi => {
            let variant = if spec.check == CheckName::ShiftPowerHarnackI {
                ShiftVariant::I
            } else {
                ShiftVariant::Ii
            };
            check_shift_harnack(
                ctx,
                need(spec.f.as_ref(), "f")?,
                variant,
                need(spec.p, "p")?,
                x,
                need(spec.y.as_deref(), "y")?,
            )?
        }
        CheckName::KrylovBound => check_krylov(ctx, need(spec.g.as_ref(), "g")?, x, exponents)?,
        CheckName::VarianceGradient => {
            check_variance_gradient(ctx, need(spec.f.as_ref(), "f")?, x, need(spec.y.as_deref(), "y")?)?
        }
    };
    Ok(r.with_label(spec.label.clone()))
}

fn failed(check: &str, e: Error) -> Error {
    Error::CheckFailed {
        check: check.into(),
        source: Box::new(e),
    }
}

fn chains(specs: &[CheckSpec], reports: &[InequalityReport]) -> Vec<ChainRecord> {
    let mut out = Vec::new();
    for (h, hs) in specs.iter().enumerate().filter(|(_, s)| s.check == CheckName::Harnack) {
        let w = specs
            .iter()
            .position(|s| s.check == CheckName::WeightMomentBound && s.x == hs.x && s.y == hs.y && s.p == hs.p);
        let g = specs
            .iter()
            .position(|s| s.check == CheckName::GirsanovConsistency && s.is_two_point() && s.x == hs.x && s.y == hs.y);
        if let (Some(w), Some(g)) = (w, g) {
            out.push(ChainRecord {
                harnack: h,
                weight_moment_bound: w,
                girsanov_consistency: g,
                chain: proof_chain(&reports[g], &reports[w], &reports[h]),
            });
        }
    }
    out
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n == 0.0 {
        let mut e = vec![0.0; v.len()];
        e[0] = 1.0;
        e
    } else {
        v.iter().map(|a| a / n).collect()
    }
}

fn base_context(cfg: &ExperimentConfig, horizon: f64, kappa: &KappaRecord, seed: u64) -> Result<VerifyContext> {
    let scenario = Scenario::new(
        cfg.drift.clone(),
        cfg.diffusion.clone(),
        TimeGrid::new(horizon, cfg.n_steps)?,
        cfg.n_samples,
        seed,
    );
    VerifyContext::new(scenario, kappa.value, kappa.source)
}

/// Factor of the swept check as a function of the grid value; this is the
/// formula curve, independent of Monte Carlo.
fn formula_factor(report: &InequalityReport, spec: &CheckSpec, displacement: f64) -> Option<f64> {
    let beta = report.constants.beta?;
    let p = spec.p?;
    let v = match spec.check {
        CheckName::Harnack | CheckName::ShiftPowerHarnackIi => harnack_factor(p, beta, displacement).ok()?,
        CheckName::WeightMomentBound => weight_moment_rhs(p, beta, displacement).ok()?,
        _ => return report.constants.factor,
    };
    v.is_finite().then_some(v)
}

pub fn run_sweep(cfg: &ExperimentConfig, sweep: &SweepSpec, kappa: &KappaRecord) -> Result<SweepResult> {
    if sweep.values.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "sweep `{}` has an empty grid",
            sweep.name
        )));
    }
    let base = &sweep.base;
    let seed = derive_seed(cfg.seed, &format!("sweep:{}", sweep.name));
    let mut rows = Vec::with_capacity(sweep.values.len());
    let mut threshold = None;
    for (i, v) in sweep.values.iter().copied().enumerate() {
        let mut spec = base.clone();
        let mut horizon = cfg.horizon;
        let mut kap = kappa.clone();
        let mut displacement = match &spec.y {
            Some(y) if spec.is_two_point() => y.iter().zip(&spec.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
            Some(y) => y.iter().map(|a| a * a).sum::<f64>().sqrt(),
            None => 0.0,
        };
        match sweep.parameter {
            SweepParameter::Displacement => {
                let y = spec.y.clone().unwrap_or_else(|| spec.x.clone());
                let diff: Vec<f64> = y.iter().zip(&spec.x).map(|(a, b)| a - b).collect();
                let dir = unit(&diff);
                spec.y = Some(spec.x.iter().zip(&dir).map(|(a, d)| a + v * d).collect());
                displacement = v;
            }
            SweepParameter::ShiftNorm => {
                let dir = unit(spec.y.as_deref().unwrap_or(&spec.x));
                spec.y = Some(dir.iter().map(|d| v * d).collect());
                displacement = v;
            }
            SweepParameter::P => spec.p = Some(v),
            SweepParameter::Horizon => {
                horizon = v;
                if kappa.source == KappaSource::Estimated {
                    kap = provide_kappa(cfg, v)?;
                }
            }
        }
        spec.label = format!("{}[{i}]", sweep.name);
        let ctx = base_context(cfg, horizon, &kap, seed)?;
        let report = run_check(&ctx, &spec, cfg.exponents()?).map_err(|e| failed(&spec.label, e))?;
        if matches!(
            sweep.parameter,
            SweepParameter::Displacement | SweepParameter::ShiftNorm
        ) {
            threshold = threshold.or(report.constants.threshold.map(f64::sqrt));
        }
        rows.push(SweepRow {
            value: v,
            factor: formula_factor(&report, &spec, displacement),
            report,
        });
    }
    Ok(SweepResult {
        name: sweep.name.clone(),
        parameter: sweep.parameter,
        check: base.check,
        threshold,
        rows,
    })
}

pub fn sweep_csv(s: &SweepResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let e = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record([
        "value",
        "factor",
        "threshold",
        "lhs",
        "rhs",
        "margin",
        "stderr",
        "verdict",
    ])
    .map_err(e)?;
    for r in &s.rows {
        w.write_record([
            fmt_f64(r.value),
            opt(r.factor),
            opt(s.threshold),
            opt(r.report.lhs.as_ref().map(|l| l.mean)),
            opt(r.report.rhs.as_ref().map(|l| l.mean)),
            opt(r.report.margin.map(|m| m.value)),
            opt(r.report.margin.map(|m| m.stderr)),
            r.report.verdict.to_string(),
        ])
        .map_err(e)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn sweep_svg(s: &SweepResult) -> String {
    let label = match s.parameter {
        SweepParameter::Displacement => "|x - y|",
        SweepParameter::ShiftNorm => "|y|",
        SweepParameter::P => "p",
        SweepParameter::Horizon => "T",
    };
    let factor: Vec<(f64, f64)> = s
        .rows
        .iter()
        .map(|r| (r.value, r.factor.unwrap_or(f64::INFINITY)))
        .collect();
    let margin: Vec<(f64, f64)> = s
        .rows
        .iter()
        .map(|r| (r.value, r.report.margin.map(|m| m.value).unwrap_or(f64::NAN)))
        .collect();
    let band: Vec<(f64, f64)> = s
        .rows
        .iter()
        .map(|r| (r.value, r.report.margin.map(|m| -3.0 * m.stderr).unwrap_or(f64::NAN)))
        .collect();
    let marker = s.threshold.map(|t| (t, "threshold"));
    render(
        &format!("{} sweep: {}", s.name, s.check),
        label,
        &[
            Panel {
                title: "factor",
                series: vec![Series {
                    label: "factor",
                    color: "#1f4e9a",
                    points: factor,
                }],
                marker,
                zero_line: false,
            },
            Panel {
                title: "margin (rhs - lhs)",
                series: vec![
                    Series {
                        label: "margin",
                        color: "#207a3c",
                        points: margin,
                    },
                    Series {
                        label: "-3 stderr",
                        color: "#999999",
                        points: band,
                    },
                ],
                marker,
                zero_line: true,
            },
        ],
    )
}

fn write(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, bytes)?;
    files.push(p);
    Ok(())
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Compute the report without touching the file system.
pub fn build_report(cfg: &ExperimentConfig, mode: RunMode) -> Result<ExperimentReport> {
    cfg.validate()?;
    let quad = QuadratureParams::default();
    let hypotheses = check_hypotheses(&cfg.drift, &cfg.diffusion, cfg.horizon, &cfg.displacements(), &quad)
        .map_err(|e| failed("hypotheses", e))?;
    let specs: Vec<&CheckSpec> = match mode {
        RunMode::Full => cfg.checks.iter().collect(),
        RunMode::Verify(name) => cfg.checks.iter().filter(|c| c.check == name).collect(),
        _ => Vec::new(),
    };
    let sweeps: &[SweepSpec] = if matches!(mode, RunMode::Full | RunMode::Sweep) {
        &cfg.sweeps
    } else {
        &[]
    };
    if let RunMode::Verify(name) = mode {
        if specs.is_empty() {
            return Err(Error::InvalidArgument(format!("config has no `{name}` check")));
        }
    }
    let need_kappa = mode == RunMode::Kappa || !specs.is_empty() || !sweeps.is_empty();
    let kappa = if need_kappa {
        Some(provide_kappa(cfg, cfg.horizon).map_err(|e| failed("kappa", e))?)
    } else {
        None
    };
    let exponents = cfg.exponents()?;
    let mut checks = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let kap = kappa.as_ref().expect("kappa is provided when checks run");
        let seed = derive_seed(cfg.seed, &format!("check:{i}:{}", spec.check));
        let ctx = base_context(cfg, cfg.horizon, kap, seed)?;
        let name = if spec.label.is_empty() {
            format!("{}#{i}", spec.check)
        } else {
            spec.label.clone()
        };
        checks.push(run_check(&ctx, spec, exponents).map_err(|e| failed(&name, e))?);
    }
    let owned: Vec<CheckSpec> = specs.iter().map(|s| (*s).clone()).collect();
    let proof_chains = chains(&owned, &checks);
    let mut sweep_results = Vec::with_capacity(sweeps.len());
    for s in sweeps {
        sweep_results.push(run_sweep(
            cfg,
            s,
            kappa.as_ref().expect("kappa is provided when sweeps run"),
        )?);
    }
    let mut violated: Vec<String> = checks
        .iter()
        .enumerate()
        .filter(|(_, r)| r.verdict == Verdict::ViolatedBeyondCi)
        .map(|(i, r)| {
            if r.label.is_empty() {
                format!("{}#{i}", r.name)
            } else {
                r.label.clone()
            }
        })
        .collect();
    for s in &sweep_results {
        violated.extend(
            s.rows
                .iter()
                .filter(|r| r.report.verdict == Verdict::ViolatedBeyondCi)
                .map(|r| r.report.label.clone()),
        );
    }
    for c in &proof_chains {
        if !c.chain.implication_holds {
            violated.push(format!("proof_chain(harnack#{})", c.harnack));
        }
    }
    let exit_status = if violated.is_empty() { 0 } else { 1 };
    Ok(ExperimentReport {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config_hash: hash_hex(serde_json::to_string(cfg)?.as_bytes()),
        seed: cfg.seed,
        n_samples: cfg.n_samples,
        n_steps: cfg.n_steps,
        horizon: cfg.horizon,
        hypotheses,
        kappa,
        checks,
        proof_chains,
        sweeps: sweep_results,
        violated,
        exit_status,
    })
}

/// Build the report and write `report.json`, `summary.csv`, per-sweep CSV
/// and SVG files, and `paths.bin` when requested, into `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, mode: RunMode) -> Result<RunOutcome> {
    let report = build_report(cfg, mode)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write(dir, "report.json", json.as_bytes(), &mut files)?;
    write(
        dir,
        "summary.csv",
        reports_to_csv(&report.checks)?.as_bytes(),
        &mut files,
    )?;
    for s in &report.sweeps {
        let stem = file_stem(&s.name);
        write(dir, &format!("sweep_{stem}.csv"), sweep_csv(s)?.as_bytes(), &mut files)?;
        write(dir, &format!("sweep_{stem}.svg"), sweep_svg(s).as_bytes(), &mut files)?;
    }
    if cfg.dump_paths {
        let mut buf = Vec::new();
        let scenario = cfg.scenario()?.with_seed(derive_seed(cfg.seed, "paths"));
        write_paths(
            &mut buf,
            &scenario,
            &cfg.drift.center(),
            DUMPED_PATHS.min(cfg.n_samples),
        )?;
        write(dir, "paths.bin", &buf, &mut files)?;
    }
    Ok(RunOutcome {
        exit_status: report.exit_status,
        report,
        files,
    })
}

/// `report.json` text with the timestamp field removed, for comparisons.
pub fn strip_timestamp(json: &str) -> Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(json)?;
    if let Some(o) = v.as_object_mut() {
        o.remove("timestamp");
    }
    Ok(serde_json::to_string(&v)?)
}
