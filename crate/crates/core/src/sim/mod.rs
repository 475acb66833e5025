//! Simulation study: scenario covariances, the three sampling laws, and the
//! rejection-rate and null-cdf experiments.

mod experiment;
mod sampler;
mod scenario;

pub use experiment::{
    null_statistic_cdf, run_rejection_experiment, CdfComparison, ExperimentConfig, RejectionRow,
    RejectionTable, SimMethod,
};
pub use sampler::{sample_ilr, DistributionSpec, Family};
pub use scenario::{
    scenario_bases, scenario_covariances, Scenario, ScenarioSpec, PAPER_ALPHA, PAPER_BETA,
};
