//! Drift and diffusion specifications, space-time norms, and the
//! integrability / ellipticity hypotheses.

pub mod diffusion;
pub mod drift;
pub mod hypotheses;
pub mod norms;
pub mod quadrature;

pub use diffusion::{DiffusionSpec, SigmaPiece, SigmaSource};
pub use drift::{space_norm, AnalyticNorms, DriftFamily, DriftSpec, GridDrift, Interpolation};
pub use hypotheses::{admissible_pq, check_hypotheses, HypothesisReport, TranslationRatio};
pub use norms::{lqp_norm, lqp_norm_between, modulus_at, modulus_norms, translation_modulus, ModulusNorms};
pub use quadrature::QuadratureParams;
