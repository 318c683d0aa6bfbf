//! Experiment orchestration: configuration files, sweeps, Monte Carlo
//! trials and result tables.

pub mod config;
pub mod experiment;

pub use config::{ExperimentConfig, Sweep};
pub use experiment::{
    bound_table, run_experiment, run_regime_comparison, verify_rademacher, BoundTable,
    ExperimentReport, PointSummary, RademacherRow, Regime, RegimeRow, TrialRecord,
};
