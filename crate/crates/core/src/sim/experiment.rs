use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::sampler::{sample_ilr, DistributionSpec};
use super::scenario::{scenario_covariances, Scenario, ScenarioSpec};
use crate::dataset::IlrDatasets;
use crate::error::{CodaError, Result};
use crate::linalg::SymmetricMatrix;
use crate::random::{derive_seed, stream_rng, SimRng};
use crate::subspace::{
    bootstrap_p_value, schott_null_params, schott_p_value, schott_params_population,
    test_statistic, BootstrapOptions, DfRounding, SchottNullParams, SchottOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMethod {
    /// Null approximation evaluated at the population covariances.
    SchottTheo,
    /// Null approximation evaluated at the sample covariances.
    SchottEst,
    Bootstrap,
}

impl SimMethod {
    pub const ALL: [SimMethod; 3] = [
        SimMethod::SchottTheo,
        SimMethod::SchottEst,
        SimMethod::Bootstrap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SimMethod::SchottTheo => "schott_theo",
            SimMethod::SchottEst => "schott_est",
            SimMethod::Bootstrap => "bootstrap",
        }
    }
}

impl fmt::Display for SimMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimMethod {
    type Err = CodaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "schott_theo" | "theo" => Ok(SimMethod::SchottTheo),
            "schott_est" | "est" => Ok(SimMethod::SchottEst),
            "bootstrap" | "boot" => Ok(SimMethod::Bootstrap),
            other => Err(CodaError::InvalidArgument(format!(
                "unknown method `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    pub dist: DistributionSpec,
    /// `(n_y, n_z)` cells.
    pub sizes: Vec<(usize, usize)>,
    pub n_sim: usize,
    pub level: f64,
    pub methods: Vec<SimMethod>,
    pub n_boot: usize,
    /// Subspace dimension under test.
    pub k: usize,
    pub seed: u64,
    pub eigengap_tol: f64,
    pub df_rounding: DfRounding,
}

impl ExperimentConfig {
    pub fn new(
        scenario: ScenarioSpec,
        dist: DistributionSpec,
        sizes: Vec<(usize, usize)>,
        n_sim: usize,
    ) -> Self {
        Self {
            scenario,
            dist,
            sizes,
            n_sim,
            level: 0.05,
            methods: SimMethod::ALL.to_vec(),
            n_boot: 1000,
            k: 2,
            seed: 0,
            eigengap_tol: 1e-8,
            df_rounding: DfRounding::Nearest,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.dist.validate()?;
        if self.n_sim == 0 {
            return Err(CodaError::InvalidConfig("n_sim must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CodaError::InvalidConfig(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if self.sizes.is_empty() {
            return Err(CodaError::InvalidConfig(
                "at least one (n_y, n_z) cell is required".into(),
            ));
        }
        if let Some(&(ny, nz)) = self.sizes.iter().find(|(ny, nz)| *ny < 2 || *nz < 2) {
            return Err(CodaError::InvalidConfig(format!(
                "cell ({ny}, {nz}) needs at least 2 rows per block"
            )));
        }
        if self.methods.is_empty() {
            return Err(CodaError::InvalidConfig("no methods selected".into()));
        }
        if self.methods.contains(&SimMethod::Bootstrap) && self.n_boot == 0 {
            return Err(CodaError::InvalidConfig("n_boot must be at least 1".into()));
        }
        if self.k == 0 || self.k > self.scenario.dim_y() {
            return Err(CodaError::BadK {
                k: self.k,
                max: self.scenario.dim_y(),
            });
        }
        Ok(())
    }

    fn schott_options(&self) -> SchottOptions {
        SchottOptions {
            eigengap_tol: self.eigengap_tol,
            df_rounding: self.df_rounding,
        }
    }
}

/// One cell of a rejection table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionRow {
    pub scenario: String,
    pub dist: String,
    pub dof: Option<u32>,
    pub n_y: usize,
    pub n_z: usize,
    pub method: SimMethod,
    /// Fraction of successful replicates with `p <= level`.
    pub rejection_rate: f64,
    pub n_sim: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RejectionTable {
    pub rows: Vec<RejectionRow>,
}

impl RejectionTable {
    pub fn get(&self, n_y: usize, n_z: usize, method: SimMethod) -> Option<&RejectionRow> {
        self.rows
            .iter()
            .find(|r| r.n_y == n_y && r.n_z == n_z && r.method == method)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| CodaError::InvalidArgument(format!("csv output: {e}"));
        for row in &self.rows {
            w.serialize(row).map_err(io)?;
        }
        w.flush()
            .map_err(|e| CodaError::InvalidArgument(format!("csv output: {e}")))?;
        Ok(())
    }
}

/// A simulated pair drawn under the scenario, with the population matrices
/// it came from.
struct Replicate {
    ilr: IlrDatasets,
    omega_y: SymmetricMatrix,
    omega_z: SymmetricMatrix,
    boot_seed: u64,
}

fn draw_data(
    dist: &DistributionSpec,
    omega_y: SymmetricMatrix,
    omega_z: SymmetricMatrix,
    n_y: usize,
    n_z: usize,
    rng: &mut SimRng,
) -> Result<Replicate> {
    let y = sample_ilr(dist, &omega_y, n_y, rng)?;
    let z = sample_ilr(dist, &omega_z, n_z, rng)?;
    let boot_seed = rng.random();
    Ok(Replicate {
        ilr: IlrDatasets::new(y, z)?,
        omega_y,
        omega_z,
        boot_seed,
    })
}

fn method_p_value(
    cfg: &ExperimentConfig,
    method: SimMethod,
    rep: &Replicate,
    t: f64,
) -> Result<f64> {
    match method {
        SimMethod::SchottTheo => {
            let params = schott_params_population(
                &rep.omega_y,
                &rep.omega_z,
                rep.ilr.n_y(),
                rep.ilr.n_z(),
                cfg.k,
                &cfg.schott_options(),
            )?;
            Ok(schott_p_value(t, &params))
        }
        SimMethod::SchottEst => {
            let params = schott_null_params(&rep.ilr, cfg.k, &cfg.schott_options())?;
            Ok(schott_p_value(t, &params))
        }
        SimMethod::Bootstrap => {
            let opts = BootstrapOptions::new(cfg.n_boot, rep.boot_seed);
            Ok(bootstrap_p_value(&rep.ilr, cfg.k, &opts)?.p_value)
        }
    }
}

/// Rejection rates per `(n_y, n_z)` cell and method. Each replicate redraws
/// the scenario bases and the data from its own stream, and every method is
/// applied to the same replicate dataset. Per-replicate numerical failures
/// are counted in `n_failed` and excluded from the rate.
pub fn run_rejection_experiment(cfg: &ExperimentConfig) -> Result<RejectionTable> {
    cfg.validate()?;
    let mut table = RejectionTable::default();
    for (cell, &(n_y, n_z)) in cfg.sizes.iter().enumerate() {
        let cell_seed = derive_seed(cfg.seed, cell as u64);
        let outcomes: Vec<Vec<Option<bool>>> = (0..cfg.n_sim)
            .into_par_iter()
            .map(|rep| -> Result<Vec<Option<bool>>> {
                let mut rng = stream_rng(cell_seed, rep as u64);
                let (oy, oz) = scenario_covariances(&cfg.scenario, &mut rng)?;
                let data = draw_data(&cfg.dist, oy, oz, n_y, n_z, &mut rng)?;
                let t = test_statistic(&data.ilr, cfg.k)?;
                Ok(cfg
                    .methods
                    .iter()
                    .map(|&m| {
                        method_p_value(cfg, m, &data, t)
                            .ok()
                            .map(|p| p <= cfg.level)
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        for (j, &method) in cfg.methods.iter().enumerate() {
            let decided: Vec<bool> = outcomes.iter().filter_map(|o| o[j]).collect();
            let rejected = decided.iter().filter(|&&r| r).count();
            table.rows.push(RejectionRow {
                scenario: cfg.scenario.scenario.to_string(),
                dist: cfg.dist.family.to_string(),
                dof: cfg
                    .dist
                    .dof
                    .filter(|_| cfg.dist.family == super::Family::Student),
                n_y,
                n_z,
                method,
                rejection_rate: if decided.is_empty() {
                    f64::NAN
                } else {
                    rejected as f64 / decided.len() as f64
                },
                n_sim: cfg.n_sim,
                n_failed: cfg.n_sim - decided.len(),
            });
        }
    }
    Ok(table)
}

/// Empirical null distribution of the statistic against the fitted
/// scaled chi-square law.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfComparison {
    /// Simulated statistics, ascending.
    pub values: Vec<f64>,
    /// Step heights `i / n` at each sorted value.
    pub empirical_cdf: Vec<f64>,
    /// Null parameters from the population covariances.
    pub fitted: SchottNullParams,
    /// Kolmogorov-Smirnov distance between the two cdfs.
    pub ks_distance: f64,
    /// Fitted cdf at the empirical 0.95 quantile. Above 0.95 the empirical
    /// cdf sits right of the fitted one.
    pub fitted_at_q95: f64,
    pub mean_statistic: f64,
    /// Mean of the sample-covariance estimate of the null mean, over the
    /// replicates where it could be computed.
    pub mean_estimated_mu: f64,
}

impl CdfComparison {
    pub fn n_sim(&self) -> usize {
        self.values.len()
    }

    /// Empirical `p`-quantile, the smallest sorted value whose step reaches `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.values.len();
        let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.values[idx]
    }

    /// Whether the empirical law sits right of the fitted one at the upper
    /// tail, i.e. the approximation under-rejects there.
    pub fn empirical_right_of_fitted(&self) -> bool {
        self.fitted_at_q95 > 0.95
    }
}

/// Simulates `n_sim` statistics at the first `(n_y, n_z)` cell under one
/// fixed draw of the S1 bases.
pub fn null_statistic_cdf(cfg: &ExperimentConfig) -> Result<CdfComparison> {
    cfg.validate()?;
    if cfg.scenario.scenario != Scenario::S1 {
        return Err(CodaError::InvalidConfig(
            "the null cdf needs scenario s1".into(),
        ));
    }
    let (n_y, n_z) = cfg.sizes[0];
    let (omega_y, omega_z) =
        scenario_covariances(&cfg.scenario, &mut stream_rng(cfg.seed, u64::MAX))?;
    let fitted =
        schott_params_population(&omega_y, &omega_z, n_y, n_z, cfg.k, &cfg.schott_options())?;
    let sims: Vec<(f64, Option<f64>)> = (0..cfg.n_sim)
        .into_par_iter()
        .map(|rep| -> Result<(f64, Option<f64>)> {
            let mut rng = stream_rng(cfg.seed, rep as u64);
            let data = draw_data(
                &cfg.dist,
                omega_y.clone(),
                omega_z.clone(),
                n_y,
                n_z,
                &mut rng,
            )?;
            let t = test_statistic(&data.ilr, cfg.k)?;
            let mu_hat = schott_null_params(&data.ilr, cfg.k, &cfg.schott_options())
                .ok()
                .map(|p| p.mu_t);
            Ok((t, mu_hat))
        })
        .collect::<Result<_>>()?;
    let n = sims.len() as f64;
    let mean_statistic = sims.iter().map(|s| s.0).sum::<f64>() / n;
    let mus: Vec<f64> = sims.iter().filter_map(|s| s.1).collect();
    let mean_estimated_mu = mus.iter().sum::<f64>() / mus.len() as f64;
    let mut values: Vec<f64> = sims.into_iter().map(|s| s.0).collect();
    values.sort_by(f64::total_cmp);
    let empirical_cdf: Vec<f64> = (1..=values.len()).map(|i| i as f64 / n).collect();
    let ks_distance = values
        .iter()
        .zip(&empirical_cdf)
        .map(|(&v, &hi)| {
            let f = fitted.cdf(v);
            (hi - f).abs().max((hi - 1.0 / n - f).abs())
        })
        .fold(0.0, f64::max);
    let mut out = CdfComparison {
        values,
        empirical_cdf,
        fitted,
        ks_distance,
        fitted_at_q95: 0.0,
        mean_statistic,
        mean_estimated_mu,
    };
    out.fitted_at_q95 = out.fitted.cdf(out.quantile(0.95));
    Ok(out)
}
