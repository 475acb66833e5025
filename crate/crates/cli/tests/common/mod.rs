#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coda_core::random::stream_rng;
use coda_core::sim::{sample_ilr, scenario_covariances, DistributionSpec, Scenario, ScenarioSpec};
use coda_core::simplex::{ilr_inv, IlrVector};

pub fn coda() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_coda"));
    cmd.env_remove("CI")
        .env_remove("CODA_SEED")
        .env_remove("CODA_JOBS");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    coda().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 stdout")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).expect("utf-8 stderr")
}

/// Compositional CSV drawn from a scenario: `n_y` rows with the last `q`
/// parts zero, then `n_z` full rows.
pub fn scenario_csv(spec: &ScenarioSpec, n_y: usize, n_z: usize, seed: u64) -> String {
    let mut rng = stream_rng(seed, 0);
    let (oy, oz) = scenario_covariances(spec, &mut rng).unwrap();
    let dist = DistributionSpec::gaussian();
    let y = sample_ilr(&dist, &oy, n_y, &mut rng).unwrap();
    let z = sample_ilr(&dist, &oz, n_z, &mut rng).unwrap();
    let mut text = (1..=spec.d)
        .map(|i| format!("p{i}"))
        .collect::<Vec<_>>()
        .join(",");
    text.push('\n');
    for (block, pad) in [(&y, spec.q), (&z, 0)] {
        for r in 0..block.nrows() {
            let coords: Vec<f64> = block.row(r).iter().copied().collect();
            let mut parts: Vec<String> = ilr_inv(&IlrVector::new(coords).unwrap())
                .unwrap()
                .into_inner()
                .iter()
                .map(|v| v.to_string())
                .collect();
            parts.extend(std::iter::repeat_n("0".to_string(), pad));
            text.push_str(&parts.join(","));
            text.push('\n');
        }
    }
    text
}

/// D = 7, Q = 2 eigenstructure with strict gaps at every K in 1..=4.
pub fn d7_spec(scenario: Scenario) -> ScenarioSpec {
    ScenarioSpec {
        scenario,
        d: 7,
        q: 2,
        k: 2,
        alpha: vec![8.0, 5.0, 2.0, 0.5],
        beta: vec![6.0, 4.0, 2.0, 0.8, 0.3, 0.1],
    }
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}
