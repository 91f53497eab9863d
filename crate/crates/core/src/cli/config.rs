use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coupling::CouplingKind;
use crate::error::{Error, Result};
use crate::estimate::{KrylovExponents, Scenario, SpaceTimeFn, TestFunction};
use crate::model::{DiffusionSpec, DriftSpec};
use crate::paths::TimeGrid;
use crate::verify::CheckName;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateTag {
    Estimate,
}

/// Either an explicit Krylov constant or `"estimate"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaConfig {
    Value(f64),
    Provider(EstimateTag),
}

impl Default for KappaConfig {
    fn default() -> Self {
        KappaConfig::Provider(EstimateTag::Estimate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingChoice {
    Harnack,
    Shift,
}

/// One requested check. Which fields are required depends on `check`;
/// see [`CheckSpec::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub check: CheckName,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<TestFunction>,
    /// Space-time test function of `krylov_bound`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<SpaceTimeFn>,
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingChoice>,
}

impl CheckSpec {
    fn needs(&self) -> (bool, bool, bool, bool) {
        // (f, y, p, g)
        use CheckName::*;
        match self.check {
            Harnack | ShiftPowerHarnackI | ShiftPowerHarnackIi => (true, true, true, false),
            WeightMomentBound => (false, true, true, false),
            GirsanovConsistency => (true, true, false, false),
            ShiftLogHarnackI | ShiftLogHarnackIi | VarianceGradient => (true, true, false, false),
            KrylovBound => (false, false, false, true),
        }
    }

    pub fn validate(&self, dim: usize, at: &str) -> Result<()> {
        let err = |field: &str, msg: String| Error::Config {
            path: format!("{at}.{field}"),
            message: msg,
        };
        let (nf, ny, np, ng) = self.needs();
        if nf && self.f.is_none() {
            return Err(err("f", format!("`{}` needs a test function", self.check)));
        }
        if ny && self.y.is_none() {
            return Err(err("y", format!("`{}` needs y", self.check)));
        }
        if np && self.p.is_none() {
            return Err(err("p", format!("`{}` needs p", self.check)));
        }
        if ng && self.g.is_none() {
            return Err(err("g", format!("`{}` needs a space-time function g", self.check)));
        }
        if self.x.len() != dim {
            return Err(err("x", format!("expected {dim} coordinates, got {}", self.x.len())));
        }
        if let Some(y) = &self.y {
            if y.len() != dim {
                return Err(err("y", format!("expected {dim} coordinates, got {}", y.len())));
            }
        }
        if let Some(p) = self.p {
            if !(p > 1.0) || !p.is_finite() {
                return Err(err("p", format!("p must be finite and > 1, got {p}")));
            }
        }
        if let Some(f) = &self.f {
            f.validate(dim).map_err(|e| err("f", e.to_string()))?;
        }
        if let Some(g) = &self.g {
            g.spatial.validate(dim).map_err(|e| err("g", e.to_string()))?;
        }
        Ok(())
    }

    pub fn coupling_kind(&self) -> CouplingKind {
        let x = self.x.clone();
        let y = self.y.clone().unwrap_or_else(|| vec![0.0; x.len()]);
        match self.coupling.unwrap_or(CouplingChoice::Harnack) {
            CouplingChoice::Harnack => CouplingKind::Harnack { x, y },
            CouplingChoice::Shift => CouplingKind::Shift { x, y },
        }
    }

    /// Whether `y` is a second starting point (rather than a shift).
    pub fn is_two_point(&self) -> bool {
        match self.check {
            CheckName::Harnack | CheckName::WeightMomentBound => true,
            CheckName::GirsanovConsistency => self.coupling != Some(CouplingChoice::Shift),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// `|x - y|` along the direction of the base check's `y - x`.
    Displacement,
    /// `|y|` along the direction of the base check's `y`.
    ShiftNorm,
    P,
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub name: String,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub base: CheckSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub kappa: KappaConfig,
    /// Paths per probe and start when `kappa` is estimated; defaults to
    /// `n_samples`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_samples: Option<usize>,
    /// Krylov exponents `(alpha, beta)`; defaults to `(p/2, q/2)` of the drift.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub krylov_exponents: Option<KrylovExponents>,
    /// Displacements at which the translation ratio is probed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_displacements: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub sweeps: Vec<SweepSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub dump_paths: bool,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("harnack-lab-out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config {
                path,
                message: format!("{inner} (line {}, column {})", inner.line(), inner.column()),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let err = |path: &str, message: String| Error::Config {
            path: path.into(),
            message,
        };
        if self.drift.dim() != self.diffusion.dim() {
            return Err(err(
                "diffusion.sigma",
                format!(
                    "sigma has {} rows but the drift is {}-dimensional",
                    self.diffusion.dim(),
                    self.drift.dim()
                ),
            ));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(err(
                "horizon",
                format!("must be positive and finite, got {}", self.horizon),
            ));
        }
        if self.n_steps == 0 {
            return Err(err("n_steps", "must be positive".into()));
        }
        if self.n_samples == 0 {
            return Err(err("n_samples", "must be positive".into()));
        }
        if self.kappa_samples == Some(0) {
            return Err(err("kappa_samples", "must be positive".into()));
        }
        if let KappaConfig::Value(k) = self.kappa {
            if !(k > 0.0) || !k.is_finite() {
                return Err(err("kappa", format!("must be positive and finite, got {k}")));
            }
        }
        if let Some(e) = self.krylov_exponents {
            KrylovExponents::new(e.alpha, e.beta, self.dim()).map_err(|e| err("krylov_exponents", e.to_string()))?;
        }
        if let Some(ys) = &self.probe_displacements {
            for (i, y) in ys.iter().enumerate() {
                if y.len() != self.dim() || y.iter().all(|v| *v == 0.0) {
                    return Err(err(
                        &format!("probe_displacements[{i}]"),
                        "must be a nonzero vector of the drift dimension".into(),
                    ));
                }
            }
        }
        for (i, c) in self.checks.iter().enumerate() {
            c.validate(self.dim(), &format!("checks[{i}]"))?;
        }
        for (i, s) in self.sweeps.iter().enumerate() {
            let at = format!("sweeps[{i}]");
            s.base.validate(self.dim(), &format!("{at}.base"))?;
            if s.values.is_empty() {
                return Err(err(&format!("{at}.values"), "sweep grid is empty".into()));
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                return Err(err(&format!("{at}.values"), "sweep values must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.n_steps)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Ok(Scenario::new(
            self.drift.clone(),
            self.diffusion.clone(),
            self.grid()?,
            self.n_samples,
            self.seed,
        ))
    }

    pub fn exponents(&self) -> Result<KrylovExponents> {
        match self.krylov_exponents {
            Some(e) => Ok(e),
            None => KrylovExponents::from_drift_exponents(self.drift.p(), self.drift.q(), self.dim()),
        }
    }

    pub fn displacements(&self) -> Vec<Vec<f64>> {
        if let Some(ys) = &self.probe_displacements {
            return ys.clone();
        }
        [0.01, 0.1, 0.5, 1.0]
            .iter()
            .map(|r| {
                let mut y = vec![0.0; self.dim()];
                y[0] = *r;
                y
            })
            .collect()
    }
}
