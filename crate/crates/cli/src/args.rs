use std::path::PathBuf;

use clap::{Args, ValueEnum};
use coda_core::sim::{Family, Scenario, SimMethod};
use coda_core::subspace::{DfRounding, MethodChoice};

/// Options shared by the randomized commands.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// Master seed. Required when the CI environment variable is set.
    #[arg(long, env = "CODA_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, env = "CODA_JOBS", value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
    /// Emit line-delimited JSON records instead of text or CSV.
    #[arg(long)]
    pub json: bool,
    /// Write the main output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// How to split the CSV rows into the zero and full blocks.
#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Accept a file without structural zeros (requires --y-rows).
    #[arg(long)]
    pub allow_no_zeros: bool,
    /// Declare the structural-zero parts instead of detecting them.
    #[arg(long, value_delimiter = ',')]
    pub zero_parts: Option<Vec<String>>,
    /// With no structural zeros, the first N rows form the Y block.
    #[arg(long, value_name = "N")]
    pub y_rows: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Schott,
    Bootstrap,
    Both,
}

impl From<MethodArg> for MethodChoice {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Schott => MethodChoice::Schott,
            MethodArg::Bootstrap => MethodChoice::Bootstrap,
            MethodArg::Both => MethodChoice::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoundingArg {
    Nearest,
    Floor,
}

impl From<RoundingArg> for DfRounding {
    fn from(r: RoundingArg) -> Self {
        match r {
            RoundingArg::Nearest => DfRounding::Nearest,
            RoundingArg::Floor => DfRounding::Floor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    S1,
    S2,
    S3,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::S1 => Scenario::S1,
            ScenarioArg::S2 => Scenario::S2,
            ScenarioArg::S3 => Scenario::S3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistArg {
    Gaussian,
    Student,
    Uniform,
}

impl From<DistArg> for Family {
    fn from(d: DistArg) -> Self {
        match d {
            DistArg::Gaussian => Family::Gaussian,
            DistArg::Student => Family::Student,
            DistArg::Uniform => Family::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SimMethodArg {
    SchottTheo,
    SchottEst,
    Bootstrap,
}

impl From<SimMethodArg> for SimMethod {
    fn from(m: SimMethodArg) -> Self {
        match m {
            SimMethodArg::SchottTheo => SimMethod::SchottTheo,
            SimMethodArg::SchottEst => SimMethod::SchottEst,
            SimMethodArg::Bootstrap => SimMethod::Bootstrap,
        }
    }
}

/// `a..b` or `a..=b`, both inclusive.
pub fn parse_k_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("expected a..b, got `{s}`"))?;
    let hi = hi.strip_prefix('=').unwrap_or(hi);
    let lo: usize = lo
        .trim()
        .parse()
        .map_err(|e| format!("bad range start: {e}"))?;
    let hi: usize = hi
        .trim()
        .parse()
        .map_err(|e| format!("bad range end: {e}"))?;
    if lo == 0 || lo > hi {
        return Err(format!("range must satisfy 1 <= a <= b, got {lo}..{hi}"));
    }
    Ok((lo, hi))
}

/// `AxB` with `A = n_y`, `B = n_z`.
pub fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected AxB, got `{s}`"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("bad n_y: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("bad n_z: {e}"))?;
    Ok((a, b))
}

fn parse_level(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("level must lie in (0, 1), got {v}"))
    }
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV file: a header of part names, then one composition per row.
    pub file: PathBuf,
    /// Dimension of the subspace under test.
    #[arg(long, required_unless_present = "k_range", conflicts_with = "k_range")]
    pub k: Option<usize>,
    /// Test every K in an inclusive range, e.g. 1..4.
    #[arg(long, value_parser = parse_k_range, value_name = "A..B")]
    pub k_range: Option<(usize, usize)>,
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_boot: u64,
    /// Significance level used for the reject/retain verdict.
    #[arg(long, default_value_t = 0.05, value_parser = parse_level)]
    pub level: f64,
    /// Rounding of the chi-square degrees of freedom.
    #[arg(long, value_enum, default_value_t = RoundingArg::Nearest)]
    pub df_rounding: RoundingArg,
    /// Relative eigengap below which the Schott approximation is refused.
    #[arg(long, default_value_t = 1e-8)]
    pub eigengap_tol: f64,
    /// Draw a fresh subspace rotation for every bootstrap replicate.
    #[arg(long)]
    pub rerandomize_rotation: bool,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub common: RunArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    #[arg(long, value_enum)]
    pub dist: DistArg,
    /// Student degrees of freedom (> 2).
    #[arg(long)]
    pub dof: Option<u32>,
    /// Sample-size cells `n_y x n_z`, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_size, default_value = "100x100")]
    pub sizes: Vec<(usize, usize)>,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "schott_theo,schott_est,bootstrap"
    )]
    pub methods: Vec<SimMethodArg>,
    /// Simulated datasets per cell (default 1000, or 200 with --reduced).
    #[arg(long)]
    pub n_sim: Option<usize>,
    /// Bootstrap replicates per test (default 1000, or 200 with --reduced).
    #[arg(long)]
    pub n_boot: Option<usize>,
    /// Desk-scale preset: n_sim = 200, n_boot = 200 unless given.
    #[arg(long)]
    pub reduced: bool,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 0.05, value_parser = parse_level)]
    pub level: f64,
    #[command(flatten)]
    pub common: RunArgs,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// CSV of compositions, or with --inverse a CSV of coordinates.
    pub file: PathBuf,
    /// Map tagged pivot coordinates back to compositions.
    #[arg(long)]
    pub inverse: bool,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CdfArgs {
    #[arg(long, value_enum, default_value_t = ScenarioArg::S1)]
    pub scenario: ScenarioArg,
    #[arg(long, value_enum)]
    pub dist: DistArg,
    #[arg(long)]
    pub dof: Option<u32>,
    /// A single `n_y x n_z` cell.
    #[arg(long, value_parser = parse_size, default_value = "100x100")]
    pub sizes: (usize, usize),
    #[arg(long, default_value_t = 1000)]
    pub n_sim: usize,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[command(flatten)]
    pub common: RunArgs,
}
