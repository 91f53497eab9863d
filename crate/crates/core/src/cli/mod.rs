//! Config-driven experiment runner behind the `harnack-lab` binary.

pub mod config;
pub mod dump;
pub mod experiment;
pub mod svg;

pub use config::{CheckSpec, CouplingChoice, ExperimentConfig, KappaConfig, SweepParameter, SweepSpec};
pub use dump::{read_paths, write_paths};
pub use experiment::{
    build_report, provide_kappa, run_check, run_experiment, run_sweep, strip_timestamp, ExperimentReport, KappaRecord,
    RunMode, RunOutcome, SweepResult, SweepRow,
};
