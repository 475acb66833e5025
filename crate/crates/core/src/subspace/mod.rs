//! The common-subspace test: statistic, scaled chi-square null approximation,
//! and bootstrap null distribution.

mod bootstrap;
mod schott;
mod statistic;

use serde::Serialize;

pub use bootstrap::{
    bootstrap_p_value, build_rotated_z, rotated_z_with, BootstrapOptions, BootstrapOutcome,
};
pub use schott::{
    schott_null_params, schott_p_value, schott_params_from_covariances, schott_params_population,
    schott_params_with, DfRounding, Loadings, SchottNullParams, SchottOptions,
};
pub use statistic::{pooled_matrix, statistic_breakdown, test_statistic, StatisticBreakdown};

use crate::dataset::{ilr_transform_split, CompositionalDataset, IlrDatasets};
use crate::error::{CodaError, Result};
use crate::linalg::sample_covariance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Schott,
    Bootstrap,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Schott => "schott",
            Method::Bootstrap => "bootstrap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Schott,
    Bootstrap,
    Both,
}

impl MethodChoice {
    pub fn methods(self) -> &'static [Method] {
        match self {
            MethodChoice::Schott => &[Method::Schott],
            MethodChoice::Bootstrap => &[Method::Bootstrap],
            MethodChoice::Both => &[Method::Schott, Method::Bootstrap],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceTestConfig {
    pub k: usize,
    pub method: MethodChoice,
    pub n_boot: usize,
    pub seed: u64,
    pub eigengap_tol: f64,
    pub df_rounding: DfRounding,
    pub rerandomize_rotation: bool,
}

impl SubspaceTestConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            method: MethodChoice::Both,
            n_boot: 1000,
            seed: 0,
            eigengap_tol: 1e-8,
            df_rounding: DfRounding::Nearest,
            rerandomize_rotation: false,
        }
    }

    pub fn schott_options(&self) -> SchottOptions {
        SchottOptions {
            eigengap_tol: self.eigengap_tol,
            df_rounding: self.df_rounding,
        }
    }

    pub fn bootstrap_options(&self) -> BootstrapOptions {
        BootstrapOptions {
            n_boot: self.n_boot,
            seed: self.seed,
            rerandomize_rotation: self.rerandomize_rotation,
        }
    }

    pub fn validate(&self, dim_y: usize) -> Result<()> {
        if self.k == 0 || self.k > dim_y {
            return Err(CodaError::BadK {
                k: self.k,
                max: dim_y,
            });
        }
        if self.n_boot == 0 {
            return Err(CodaError::InvalidConfig("n_boot must be at least 1".into()));
        }
        if !(self.eigengap_tol > 0.0) {
            return Err(CodaError::InvalidConfig(
                "eigengap_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub k: usize,
    pub null_params: Option<SchottNullParams>,
    pub n_boot_used: Option<usize>,
    pub warnings: Vec<String>,
}

fn eigengap_warnings(b: &StatisticBreakdown, k: usize, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    for (name, values) in [
        ("Y covariance", &b.alpha),
        ("Z covariance", &b.beta),
        ("pooled matrix", &b.gamma),
    ] {
        if k >= values.len() {
            continue;
        }
        let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gap = values[k - 1] - values[k];
        if !(gap > tol * top) {
            out.push(format!(
                "near-degenerate eigengap in {name}: eigenvalues {k} and {} differ by {gap:.3e}",
                k + 1
            ));
        }
    }
    out
}

/// Sample-covariance null parameters with direct loadings.
fn schott_params_direct(
    ilr: &IlrDatasets,
    k: usize,
    opts: &SchottOptions,
) -> Result<SchottNullParams> {
    let omega_y = sample_covariance(ilr.y_tilde())?;
    let omega_z = sample_covariance(ilr.z_tilde())?;
    schott_params_with(
        &omega_y,
        &omega_z,
        ilr.n_y(),
        ilr.n_z(),
        k,
        opts,
        Loadings::Direct,
    )
}

/// Runs the configured method(s) on already-transformed coordinates. When
/// the projected loadings give a non-positive mean, the Schott fit falls
/// back to direct loadings and says so in `warnings`.
pub fn run_test_ilr(ilr: &IlrDatasets, cfg: &SubspaceTestConfig) -> Result<Vec<TestResult>> {
    cfg.validate(ilr.dim_y())?;
    let breakdown = statistic_breakdown(ilr, cfg.k)?;
    let gap_warnings = eigengap_warnings(&breakdown, cfg.k, cfg.eigengap_tol);
    let mut results = Vec::new();
    for &method in cfg.method.methods() {
        let mut warnings = gap_warnings.clone();
        let result = match method {
            Method::Schott => {
                let params = match schott_null_params(ilr, cfg.k, &cfg.schott_options()) {
                    Err(CodaError::ApproximationInvalid { mu_t, .. }) => {
                        warnings.push(format!(
                            "projected loadings gave mu_T = {mu_t:.3e}; used direct loadings"
                        ));
                        schott_params_direct(ilr, cfg.k, &cfg.schott_options())?
                    }
                    other => other?,
                };
                TestResult {
                    statistic: breakdown.statistic,
                    p_value: schott_p_value(breakdown.statistic, &params),
                    method,
                    k: cfg.k,
                    null_params: Some(params),
                    n_boot_used: None,
                    warnings,
                }
            }
            Method::Bootstrap => {
                let out = bootstrap_p_value(ilr, cfg.k, &cfg.bootstrap_options())?;
                if out.exceedances == 0 {
                    warnings.push(format!(
                        "bootstrap p-value < 1/n_boot = {:e}",
                        1.0 / out.n_boot as f64
                    ));
                }
                TestResult {
                    statistic: out.statistic,
                    p_value: out.p_value,
                    method,
                    k: cfg.k,
                    null_params: None,
                    n_boot_used: Some(out.n_boot),
                    warnings,
                }
            }
        };
        results.push(result);
    }
    Ok(results)
}

/// Full pipeline on a compositional dataset: pivot coordinates, statistic,
/// then the p-value of each configured method.
pub fn run_test(ds: &CompositionalDataset, cfg: &SubspaceTestConfig) -> Result<Vec<TestResult>> {
    let ilr = ilr_transform_split(ds)?;
    let mut results = run_test_ilr(&ilr, cfg)?;
    if ds.renormalized {
        for r in &mut results {
            r.warnings.push("input rows were closed to unit sum".into());
        }
    }
    Ok(results)
}
