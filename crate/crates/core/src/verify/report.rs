use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::McEstimate;

/// Number of combined standard errors a margin may fall short by.
pub const SIGMA_MARGIN: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Harnack,
    ShiftLogHarnackI,
    ShiftPowerHarnackI,
    ShiftLogHarnackIi,
    ShiftPowerHarnackIi,
    GirsanovConsistency,
    WeightMomentBound,
    KrylovBound,
    VarianceGradient,
}

impl CheckName {
    pub const ALL: [CheckName; 9] = [
        CheckName::Harnack,
        CheckName::ShiftLogHarnackI,
        CheckName::ShiftPowerHarnackI,
        CheckName::ShiftLogHarnackIi,
        CheckName::ShiftPowerHarnackIi,
        CheckName::GirsanovConsistency,
        CheckName::WeightMomentBound,
        CheckName::KrylovBound,
        CheckName::VarianceGradient,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CheckName::Harnack => "harnack",
            CheckName::ShiftLogHarnackI => "shift_log_harnack_i",
            CheckName::ShiftPowerHarnackI => "shift_power_harnack_i",
            CheckName::ShiftLogHarnackIi => "shift_log_harnack_ii",
            CheckName::ShiftPowerHarnackIi => "shift_power_harnack_ii",
            CheckName::GirsanovConsistency => "girsanov_consistency",
            CheckName::WeightMomentBound => "weight_moment_bound",
            CheckName::KrylovBound => "krylov_bound",
            CheckName::VarianceGradient => "variance_gradient",
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        CheckName::ALL
            .iter()
            .find(|c| c.as_str() == norm)
            .copied()
            .ok_or_else(|| {
                let names: Vec<_> = CheckName::ALL.iter().map(|c| c.as_str()).collect();
                Error::InvalidArgument(format!("unknown check `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    HoldsWithinCi,
    ViolatedBeyondCi,
    NotAdmissible,
}

impl Verdict {
    /// `Holds` for a nonnegative margin, `HoldsWithinCi` down to
    /// `-3 stderr`, `ViolatedBeyondCi` below.
    pub fn from_margin(value: f64, stderr: f64) -> Verdict {
        if value >= 0.0 {
            Verdict::Holds
        } else if value >= -SIGMA_MARGIN * stderr {
            Verdict::HoldsWithinCi
        } else {
            Verdict::ViolatedBeyondCi
        }
    }

    /// Two-sided version for equalities.
    pub fn from_difference(diff: f64, stderr: f64) -> Verdict {
        if diff == 0.0 {
            Verdict::Holds
        } else if diff.abs() <= SIGMA_MARGIN * stderr {
            Verdict::HoldsWithinCi
        } else {
            Verdict::ViolatedBeyondCi
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Holds | Verdict::HoldsWithinCi)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::HoldsWithinCi => "holds_within_ci",
            Verdict::ViolatedBeyondCi => "violated_beyond_ci",
            Verdict::NotAdmissible => "not_admissible",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaSource {
    Given,
    Estimated,
}

/// Khasminskii construction behind a variant (i) factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRecord {
    /// `None` when `2^n` overflows f64.
    pub gamma: Option<f64>,
    pub log_gamma: f64,
    pub pieces: usize,
    pub lambda: f64,
    /// `lambda kappa ||4|b|^2||` over the whole horizon.
    pub total_load: f64,
}

/// Constants entering a check. Infinite or unavailable values are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsUsed {
    pub beta: Option<f64>,
    pub kappa: f64,
    pub kappa_source: KappaSource,
    pub delta: f64,
    /// `||K||_{L^q([0,T])}`.
    pub k_lq_norm: Option<f64>,
    /// `( int_0^T K^{2q} )^{1/q}`, logged next to `k_lq_norm^2`.
    pub k_squared_2q_norm: Option<f64>,
    pub lipschitz: Option<f64>,
    /// `||b||_{L^q_p(T)}`.
    pub b_norm: Option<f64>,
    pub p: Option<f64>,
    pub horizon: f64,
    pub factor: Option<f64>,
    pub log_factor: Option<f64>,
    pub threshold: Option<f64>,
    pub gamma: Option<GammaRecord>,
}

impl ConstantsUsed {
    /// `key=value` pairs separated by `;`, skipping absent values.
    pub fn compact(&self) -> String {
        let mut parts = Vec::new();
        let mut push = |k: &str, v: Option<f64>| {
            if let Some(v) = v {
                parts.push(format!("{k}={}", fmt_f64(v)));
            }
        };
        push("beta", self.beta);
        push("kappa", Some(self.kappa));
        push("delta", Some(self.delta));
        push("K", self.k_lq_norm);
        push("L", self.lipschitz);
        push("b", self.b_norm);
        push("p", self.p);
        push("T", Some(self.horizon));
        push("factor", self.factor);
        push("threshold", self.threshold);
        push("log_gamma", self.gamma.as_ref().map(|g| g.log_gamma));
        parts.join(";")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    /// `rhs - lhs`.
    pub value: f64,
    /// `sqrt(se_lhs^2 + se_rhs^2)`.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: CheckName,
    /// Free-form tag distinguishing repeated checks, e.g. grid coordinates.
    #[serde(default)]
    pub label: String,
    pub lhs: Option<McEstimate>,
    pub rhs: Option<McEstimate>,
    pub constants: ConstantsUsed,
    pub admissible: bool,
    pub margin: Option<Margin>,
    pub verdict: Verdict,
    pub seed: u64,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl InequalityReport {
    pub(crate) fn compared(
        name: CheckName,
        lhs: McEstimate,
        rhs: McEstimate,
        constants: ConstantsUsed,
        seed: u64,
    ) -> Self {
        let margin = Margin {
            value: rhs.mean - lhs.mean,
            stderr: lhs.stderr.hypot(rhs.stderr),
        };
        Self {
            name,
            label: String::new(),
            verdict: Verdict::from_margin(margin.value, margin.stderr),
            lhs: Some(lhs),
            rhs: Some(rhs),
            constants,
            admissible: true,
            margin: Some(margin),
            seed,
            notes: Vec::new(),
        }
    }

    pub(crate) fn not_admissible(name: CheckName, constants: ConstantsUsed, seed: u64, note: String) -> Self {
        Self {
            name,
            label: String::new(),
            lhs: None,
            rhs: None,
            constants,
            admissible: false,
            margin: None,
            verdict: Verdict::NotAdmissible,
            seed,
            notes: vec![note],
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

const CSV_HEADER: [&str; 9] = [
    "name",
    "label",
    "lhs",
    "rhs",
    "margin",
    "stderr",
    "verdict",
    "constants",
    "notes",
];

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-5, 1e16)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// One row per report with columns
/// `name, label, lhs, rhs, margin, stderr, verdict, constants, notes`.
pub fn reports_to_csv(reports: &[InequalityReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in reports {
        w.write_record([
            r.name.as_str().to_string(),
            r.label.clone(),
            opt(r.lhs.as_ref().map(|e| e.mean)),
            opt(r.rhs.as_ref().map(|e| e.mean)),
            opt(r.margin.map(|m| m.value)),
            opt(r.margin.map(|m| m.stderr)),
            r.verdict.as_str().to_string(),
            r.constants.compact(),
            r.notes.join(" | "),
        ])
        .map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_bands() {
        assert_eq!(Verdict::from_margin(0.0, 0.0), Verdict::Holds);
        assert_eq!(Verdict::from_margin(-0.29, 0.1), Verdict::HoldsWithinCi);
        assert_eq!(Verdict::from_margin(-0.31, 0.1), Verdict::ViolatedBeyondCi);
        assert_eq!(Verdict::from_difference(0.2, 0.1), Verdict::HoldsWithinCi);
        assert_eq!(Verdict::from_difference(-0.4, 0.1), Verdict::ViolatedBeyondCi);
    }

    #[test]
    fn names_round_trip() {
        for c in CheckName::ALL {
            assert_eq!(c.as_str().parse::<CheckName>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.as_str()));
        }
        assert_eq!(
            "weight-moment-bound".parse::<CheckName>().unwrap(),
            CheckName::WeightMomentBound
        );
        assert!("nope".parse::<CheckName>().is_err());
    }
}
