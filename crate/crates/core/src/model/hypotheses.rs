use serde::{Deserialize, Serialize};

use super::diffusion::DiffusionSpec;
use super::drift::DriftSpec;
use super::norms::{lqp_norm, modulus_at, modulus_norms, translation_modulus};
use super::quadrature::QuadratureParams;
use crate::error::{Error, Result};

/// Number of time samples in the reported `K(t)` profile.
const PROFILE_POINTS: usize = 17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationRatio {
    pub displacement_norm: f64,
    /// `sup_t ||b_t(. + y) - b_t||_p / |y|` over the sampled times.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub lqp_norm_of_b: f64,
    /// `(t, K(t))`; empty when the family has no closed-form modulus.
    pub k_profile: Vec<(f64, f64)>,
    pub k_lq_norm: Option<f64>,
    /// `( int_0^T K^{2q} )^{1/q}`, logged next to `k_lq_norm^2`.
    pub k_squared_2q_norm: Option<f64>,
    pub admissible_pq: bool,
    pub h2_ok: bool,
    pub sigma_eigen_range: (f64, f64),
    pub empirical_translation_ratios: Vec<TranslationRatio>,
}

/// `d/p + 2/q < 1`.
pub fn admissible_pq(dim: usize, p: f64, q: f64) -> bool {
    dim as f64 / p + 2.0 / q < 1.0
}

pub fn check_hypotheses(
    drift: &DriftSpec,
    diffusion: &DiffusionSpec,
    horizon: f64,
    probe_displacements: &[Vec<f64>],
    quad: &QuadratureParams,
) -> Result<HypothesisReport> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if drift.dim() != diffusion.dim() {
        return Err(Error::DimensionMismatch {
            expected: drift.dim(),
            got: diffusion.dim(),
        });
    }
    let times: Vec<f64> = (0..PROFILE_POINTS)
        .map(|i| horizon * i as f64 / (PROFILE_POINTS - 1) as f64)
        .collect();
    let k_profile: Vec<(f64, f64)> = times
        .iter()
        .filter_map(|t| modulus_at(drift, *t).map(|k| (*t, k)))
        .collect();
    let kn = modulus_norms(drift, horizon);

    let ratio_times: &[f64] = if drift.is_time_homogeneous() {
        &times[..1]
    } else {
        &times
    };
    let mut ratios = Vec::with_capacity(probe_displacements.len());
    for y in probe_displacements {
        let norm = super::drift::euclid(y);
        let mut sup = 0.0f64;
        for t in ratio_times {
            sup = sup.max(translation_modulus(drift, *t, y, quad)? / norm);
        }
        ratios.push(TranslationRatio {
            displacement_norm: norm,
            ratio: sup,
        });
    }

    Ok(HypothesisReport {
        lqp_norm_of_b: lqp_norm(drift, horizon, quad)?,
        k_profile,
        k_lq_norm: kn.map(|k| k.lq),
        k_squared_2q_norm: kn.map(|k| k.squared_2q),
        admissible_pq: admissible_pq(drift.dim(), drift.p(), drift.q()),
        h2_ok: diffusion.is_elliptic(),
        sigma_eigen_range: diffusion.eigen_range(),
        empirical_translation_ratios: ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_drift_report() {
        let b = DriftSpec::zero(1, 4.0, 4.0).unwrap();
        let s = DiffusionSpec::identity(1, 1.5).unwrap();
        let r = check_hypotheses(&b, &s, 1.0, &[vec![0.1]], &QuadratureParams::default()).unwrap();
        assert!(r.admissible_pq);
        assert_eq!(r.lqp_norm_of_b, 0.0);
        assert!(r.h2_ok);
        assert_eq!(r.k_lq_norm, Some(0.0));
    }

    #[test]
    fn pq_predicate() {
        assert!(!admissible_pq(2, 2.0, 2.0));
        assert!(admissible_pq(1, 4.0, 4.0));
        assert!(!admissible_pq(1, 2.0, 4.0));
    }

    #[test]
    fn indicator_ratio_blows_up() {
        let b = DriftSpec::indicator_box(vec![1.0], vec![0.0], vec![1.0], 2.0, 8.0).unwrap();
        let s = DiffusionSpec::identity(1, 1.5).unwrap();
        let ys: Vec<Vec<f64>> = [1.0, 0.5, 0.1, 0.01].iter().map(|v| vec![*v]).collect();
        let r = check_hypotheses(&b, &s, 1.0, &ys, &QuadratureParams::default()).unwrap();
        for row in &r.empirical_translation_ratios {
            let y = row.displacement_norm;
            assert!((row.ratio - 2f64.sqrt() * y.powf(-0.5)).abs() < 1e-12);
        }
        assert!(r.k_profile.is_empty());
        assert_eq!(r.k_lq_norm, None);
    }
}
