use std::collections::BTreeMap;
use std::fs;
use std::io::Write;

use coda_core::dataset::{ilr_transform_split, load_csv_with, CompositionalDataset, LoadOptions};
use coda_core::sim::{
    null_statistic_cdf, run_rejection_experiment, DistributionSpec, ExperimentConfig, Family,
    Scenario, ScenarioSpec, SimMethod,
};
use coda_core::simplex::{ilr_inv, IlrVector};
use coda_core::subspace::{run_test, Method, SubspaceTestConfig, TestResult};
use coda_core::CodaError;
use serde::Serialize;

use crate::args::{CdfArgs, DistArg, RunArgs, SimulateArgs, SplitArgs, TestArgs, TransformArgs};
use crate::output::{io_error, open_output, CliError};

/// Seed used when neither `--seed` nor `CODA_SEED` is given outside CI.
pub const DEFAULT_SEED: u64 = 1;

/// Runs `f` on a pool of `jobs` threads, or on the global pool.
pub fn with_jobs<F>(jobs: Option<u64>, f: F) -> Result<(), CliError>
where
    F: FnOnce() -> Result<(), CliError> + Send,
{
    match jobs {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?
            .install(f),
    }
}

fn resolve_seed(common: &RunArgs) -> Result<u64, CliError> {
    if let Some(seed) = common.seed {
        return Ok(seed);
    }
    match std::env::var("CI") {
        Ok(v) if !v.is_empty() && v != "0" && v != "false" => Err(CliError::Usage(
            "randomized commands need --seed (or CODA_SEED) when CI is set".into(),
        )),
        _ => Ok(DEFAULT_SEED),
    }
}

fn load(file: &std::path::Path, split: &SplitArgs) -> Result<CompositionalDataset, CliError> {
    let opts = LoadOptions {
        zero_parts: split.zero_parts.clone(),
        y_rows_without_zeros: split.y_rows,
    };
    Ok(load_csv_with(file, &opts)?)
}

fn distribution(dist: DistArg, dof: Option<u32>) -> Result<DistributionSpec, CliError> {
    let family = Family::from(dist);
    match (family, dof) {
        (Family::Student, None) => Err(CliError::Usage("--dist student requires --dof".into())),
        (Family::Student, Some(nu)) if nu <= 2 => {
            Err(CliError::Usage(format!("--dof must exceed 2, got {nu}")))
        }
        (Family::Student, Some(nu)) => Ok(DistributionSpec::student(nu)),
        (_, Some(_)) => Err(CliError::Usage(
            "--dof only applies to --dist student".into(),
        )),
        (_, None) => Ok(DistributionSpec { family, dof: None }),
    }
}

/// Configuration problems caught before any work are usage errors.
fn config_error(e: CodaError) -> CliError {
    match e {
        CodaError::InvalidConfig(_) | CodaError::BadK { .. } => CliError::Usage(e.to_string()),
        other => CliError::Coda(other),
    }
}

#[derive(Serialize)]
struct TestRecord<'a> {
    dataset: &'a str,
    parts: usize,
    q: usize,
    n_y: usize,
    n_z: usize,
    level: f64,
    reject: bool,
    #[serde(flatten)]
    result: &'a TestResult,
}

fn write_test_text(
    out: &mut dyn Write,
    results: &[TestResult],
    level: f64,
    seed: u64,
) -> Result<(), CliError> {
    let first = &results[0];
    writeln!(out, "K={}  T={:.6}", first.k, first.statistic)?;
    for r in results {
        let verdict = if r.p_value <= level {
            "reject"
        } else {
            "retain"
        };
        match r.method {
            Method::Schott => {
                let p = r
                    .null_params
                    .as_ref()
                    .expect("schott result carries its parameters");
                writeln!(
                    out,
                    "  schott     p={:.6}  {verdict} at {level}  (mu_T={:.6}, sigma2_T={:.6}, df={}, scale={:.6})",
                    r.p_value, p.mu_t, p.sigma2_t, p.df, p.scale
                )?;
            }
            Method::Bootstrap => {
                writeln!(
                    out,
                    "  bootstrap  p={:.6}  {verdict} at {level}  (n_boot={}, seed={seed})",
                    r.p_value,
                    r.n_boot_used.unwrap_or_default()
                )?;
            }
        }
        for w in &r.warnings {
            writeln!(out, "  warning ({}): {w}", r.method.as_str())?;
        }
    }
    Ok(())
}

pub fn test(a: &TestArgs) -> Result<(), CliError> {
    let ds = load(&a.file, &a.split)?;
    if ds.q() == 0 {
        if !a.split.allow_no_zeros {
            return Err(CliError::Coda(CodaError::InvalidArgument(
                "no structural-zero parts found; pass --allow-no-zeros with --y-rows to test anyway".into(),
            )));
        }
        if a.split.y_rows.is_none() {
            return Err(CliError::Usage(
                "--allow-no-zeros needs --y-rows to form the Y block".into(),
            ));
        }
    }
    let uses_bootstrap = a.method != crate::args::MethodArg::Schott;
    let seed = if uses_bootstrap {
        resolve_seed(&a.common)?
    } else {
        a.common.seed.unwrap_or(DEFAULT_SEED)
    };
    let ks: Vec<usize> = match (a.k, a.k_range) {
        (Some(k), _) => vec![k],
        (None, Some((lo, hi))) => (lo..=hi).collect(),
        (None, None) => {
            return Err(CliError::Usage(
                "one of --k or --k-range is required".into(),
            ))
        }
    };
    let max_k = ds.parts() - ds.q() - 1;
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > max_k) {
        return Err(CliError::Coda(CodaError::BadK { k, max: max_k }));
    }

    let mut out = open_output(a.common.out.as_deref())?;
    if !a.common.json {
        writeln!(out, "dataset: {}", ds.provenance)?;
        let zero_names = &ds.part_names()[ds.parts() - ds.q()..];
        writeln!(
            out,
            "D={} Q={} ({}) n_y={} n_z={}",
            ds.parts(),
            ds.q(),
            if zero_names.is_empty() {
                "none".to_string()
            } else {
                zero_names.join(", ")
            },
            ds.n_y(),
            ds.n_z()
        )?;
    }
    for k in ks {
        let cfg = SubspaceTestConfig {
            k,
            method: a.method.into(),
            n_boot: a.n_boot as usize,
            seed,
            eigengap_tol: a.eigengap_tol,
            df_rounding: a.df_rounding.into(),
            rerandomize_rotation: a.rerandomize_rotation,
        };
        let results = match run_test(&ds, &cfg) {
            Ok(r) => r,
            Err(e) => {
                out.flush()?;
                return Err(e.into());
            }
        };
        if a.common.json {
            for r in &results {
                let record = TestRecord {
                    dataset: &ds.provenance,
                    parts: ds.parts(),
                    q: ds.q(),
                    n_y: ds.n_y(),
                    n_z: ds.n_z(),
                    level: a.level,
                    reject: r.p_value <= a.level,
                    result: r,
                };
                serde_json::to_writer(&mut out, &record)?;
                writeln!(out)?;
            }
        } else {
            write_test_text(&mut out, &results, a.level, seed)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let dist = distribution(a.dist, a.dof)?;
    let seed = resolve_seed(&a.common)?;
    let preset = if a.reduced { 200 } else { 1000 };
    let mut methods: Vec<SimMethod> = Vec::new();
    for m in &a.methods {
        let m = SimMethod::from(*m);
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    let mut cfg = ExperimentConfig::new(
        ScenarioSpec::paper(a.scenario.into()),
        dist,
        a.sizes.clone(),
        a.n_sim.unwrap_or(preset),
    );
    cfg.n_boot = a.n_boot.unwrap_or(preset);
    cfg.methods = methods;
    cfg.level = a.level;
    cfg.k = a.k;
    cfg.seed = seed;
    cfg.validate().map_err(config_error)?;

    let table = run_rejection_experiment(&cfg)?;
    let mut out = open_output(a.common.out.as_deref())?;
    if a.common.json {
        for row in &table.rows {
            serde_json::to_writer(&mut out, row)?;
            writeln!(out)?;
        }
    } else {
        table.write_csv(&mut out)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CdfSummary<'a> {
    scenario: &'a str,
    dist: &'a str,
    dof: Option<u32>,
    n_y: usize,
    n_z: usize,
    n_sim: usize,
    ks_distance: f64,
    fitted: &'a coda_core::subspace::SchottNullParams,
    empirical_q95: f64,
    fitted_cdf_at_empirical_q95: f64,
    empirical_right_of_fitted: bool,
    mean_statistic: f64,
    mean_estimated_mu: f64,
}

/// Points at which the fitted cdf is tabulated.
const FITTED_GRID: usize = 200;

pub fn cdf(a: &CdfArgs) -> Result<(), CliError> {
    if Scenario::from(a.scenario) != Scenario::S1 {
        return Err(CliError::Usage(
            "cdf compares null distributions and needs --scenario s1".into(),
        ));
    }
    let dist = distribution(a.dist, a.dof)?;
    let seed = resolve_seed(&a.common)?;
    let mut cfg = ExperimentConfig::new(
        ScenarioSpec::paper(Scenario::S1),
        dist,
        vec![a.sizes],
        a.n_sim,
    );
    cfg.k = a.k;
    cfg.seed = seed;
    cfg.methods = vec![SimMethod::SchottTheo];
    cfg.validate().map_err(config_error)?;
    let c = null_statistic_cdf(&cfg)?;

    let summary = CdfSummary {
        scenario: "s1",
        dist: dist.family.as_str(),
        dof: dist.dof,
        n_y: a.sizes.0,
        n_z: a.sizes.1,
        n_sim: c.n_sim(),
        ks_distance: c.ks_distance,
        fitted: &c.fitted,
        empirical_q95: c.quantile(0.95),
        fitted_cdf_at_empirical_q95: c.fitted_at_q95,
        empirical_right_of_fitted: c.empirical_right_of_fitted(),
        mean_statistic: c.mean_statistic,
        mean_estimated_mu: c.mean_estimated_mu,
    };
    let mut out = open_output(a.common.out.as_deref())?;
    if a.common.json {
        serde_json::to_writer(&mut out, &summary)?;
        writeln!(out)?;
        out.flush()?;
        return Ok(());
    }
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(["series", "value", "cdf"])?;
    for (v, f) in c.values.iter().zip(&c.empirical_cdf) {
        w.write_record(["empirical", &v.to_string(), &f.to_string()])?;
    }
    let top = c
        .values
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(c.fitted.mu_t * 3.0);
    for i in 0..=FITTED_GRID {
        let v = top * i as f64 / FITTED_GRID as f64;
        w.write_record(["fitted", &v.to_string(), &c.fitted.cdf(v).to_string()])?;
    }
    w.flush()?;
    drop(w);
    out.flush()?;
    eprintln!("n_sim={} n_y={} n_z={}", c.n_sim(), a.sizes.0, a.sizes.1);
    eprintln!(
        "fitted: mu_T={:.6} sigma2_T={:.6} df={} scale={:.6}",
        c.fitted.mu_t, c.fitted.sigma2_t, c.fitted.df, c.fitted.scale
    );
    eprintln!("ks_distance={:.6}", c.ks_distance);
    eprintln!(
        "fitted_cdf_at_empirical_q95={:.6} empirical_right_of_fitted={}",
        c.fitted_at_q95,
        c.empirical_right_of_fitted()
    );
    eprintln!(
        "mean_statistic={:.6} mean_estimated_mu={:.6}",
        c.mean_statistic, c.mean_estimated_mu
    );
    Ok(())
}

pub fn transform(a: &TransformArgs) -> Result<(), CliError> {
    if a.inverse {
        return inverse_transform(a);
    }
    let ds = load(&a.file, &a.split)?;
    let ilr = ilr_transform_split(&ds)?;
    let p = ilr.dim_z();
    let mut out = open_output(a.out.as_deref())?;
    writeln!(out, "# q={}", ds.q())?;
    writeln!(out, "# parts={}", ds.part_names().join(";"))?;
    let mut w = csv::Writer::from_writer(&mut out);
    let mut header = vec!["block".to_string()];
    header.extend((1..=p).map(|i| format!("ilr{i}")));
    w.write_record(&header)?;
    for (tag, block) in [("y", ilr.y_tilde()), ("z", ilr.z_tilde())] {
        for r in 0..block.nrows() {
            let mut fields = vec![tag.to_string()];
            fields.extend(block.row(r).iter().map(|v| v.to_string()));
            fields.resize(p + 1, String::new());
            w.write_record(&fields)?;
        }
    }
    w.flush()?;
    drop(w);
    out.flush()?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> CliError {
    CliError::Coda(CodaError::Parse {
        line,
        message: message.into(),
    })
}

/// Reads the tagged coordinate CSV written by `transform` and writes the
/// compositions, zero-padding the Y rows.
fn inverse_transform(a: &TransformArgs) -> Result<(), CliError> {
    let path = a.file.display().to_string();
    let text = fs::read_to_string(&a.file).map_err(|e| io_error(&path, e))?;
    let mut meta = BTreeMap::new();
    for line in text.lines().filter(|l| l.starts_with('#')) {
        if let Some((key, value)) = line.trim_start_matches('#').trim().split_once('=') {
            meta.insert(key.trim().to_string(), value.trim().to_string());
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.len() < 2 || &header[0] != "block" {
        return Err(parse_err(
            1,
            "expected a `block` column followed by coordinates",
        ));
    }
    let d = header.len();
    let names: Vec<String> = match meta.get("parts") {
        Some(list) => list.split(';').map(str::to_owned).collect(),
        None => (1..=d).map(|i| format!("x{i}")).collect(),
    };
    if names.len() != d {
        return Err(parse_err(
            1,
            format!("{} part names for {} coordinates", names.len(), d - 1),
        ));
    }
    let declared_q: Option<usize> = match meta.get("q") {
        Some(q) => Some(
            q.parse()
                .map_err(|_| parse_err(1, format!("bad q comment: {q:?}")))?,
        ),
        None => None,
    };

    let mut y_rows: Vec<Vec<f64>> = Vec::new();
    let mut z_rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record
            .map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let coords: Vec<f64> = record
            .iter()
            .skip(1)
            .filter(|f| !f.is_empty())
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(line, format!("not a number: {f:?}")))
            })
            .collect::<Result<_, _>>()?;
        let parts = ilr_inv(&IlrVector::new(coords)?)?.into_inner();
        match &record[0] {
            "y" => y_rows.push(parts),
            "z" => z_rows.push(parts),
            other => return Err(parse_err(line, format!("unknown block tag {other:?}"))),
        }
    }
    if let Some(z) = z_rows.iter().find(|r| r.len() != d) {
        return Err(parse_err(
            0,
            format!("z row with {} coordinates, expected {}", z.len() - 1, d - 1),
        ));
    }
    let q = match (declared_q, y_rows.first()) {
        (Some(q), _) => q,
        (None, Some(first)) => d - first.len(),
        (None, None) => 0,
    };
    if let Some(y) = y_rows.iter().find(|r| r.len() + q != d) {
        return Err(parse_err(
            0,
            format!(
                "y row with {} coordinates, expected {}",
                y.len() - 1,
                d - q - 1
            ),
        ));
    }

    let mut out = open_output(a.out.as_deref())?;
    writeln!(out, "# q={q}")?;
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(&names)?;
    for row in &y_rows {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        fields.resize(d, "0".to_string());
        w.write_record(&fields)?;
    }
    for row in &z_rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    drop(w);
    out.flush()?;
    Ok(())
}
