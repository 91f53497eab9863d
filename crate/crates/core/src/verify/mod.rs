//! Inequality checks: each compares a Monte Carlo left-hand side against
//! an explicit right-hand side and issues a verdict with a 3-sigma band.

pub mod checks;
pub mod constants;
pub mod report;

pub use checks::{
    check_girsanov_consistency, check_harnack, check_krylov, check_shift_harnack, check_shift_log_harnack,
    check_variance_gradient, check_weight_moment_bound, proof_chain, shift_gamma, ProofChain, ShiftVariant,
    VerifyContext, LOG_FLOOR,
};
pub use constants::{
    beta_constant, beta_lipschitz, harnack_admissible, harnack_factor, shift_lambda, shift_log_constant_i,
    shift_log_constant_ii, shift_power_exponent_i, smallness_coefficient, weight_moment_rhs,
};
pub use report::{
    fmt_f64, reports_to_csv, CheckName, ConstantsUsed, GammaRecord, InequalityReport, KappaSource, Margin, Verdict,
    SIGMA_MARGIN,
};
