//! Monte Carlo sweeps: repeated draws `s ~ Pⁿ`, estimation errors, their
//! moments and tails against the bound catalog, and the sensitivity and
//! leave-one-out audits.
//!
//! Trial `t` is computed from the seed `mix64(master, t)` alone and results are
//! folded in trial order, so reports do not depend on the worker count.

mod audits;
mod config;
mod sweep;

pub use audits::{
    delta_sensitivity_audit, estimation_error_tail_check, loo_audit, BetaAudit, LooReport,
};
pub use config::{
    make_distribution, make_statistic, DistributionSpec, ExperimentConfig, StatisticSpec,
    MAX_SUPPORT,
};
pub use sweep::{
    moment_and_tail_report, run_sweep, run_trials, run_trials_with, sweep, write_trials_csv,
    BoundCheck, Experiment, SweepReport, TailSummary, TrialFailure, TrialOutcome, TrialRecord,
    CONFIG_FILE, REPORT_FILE, SE_SLACK, TRIALS_FILE,
};
