//! Shared fixtures for the benchmarks.

use coda_core::random::stream_rng;
use coda_core::sim::{sample_ilr, scenario_covariances, DistributionSpec, Scenario, ScenarioSpec};
use coda_core::{IlrDatasets, SymmetricMatrix};
use nalgebra::DMatrix;

/// A Gaussian pair drawn under the study's S1 scenario.
pub fn s1_pair(n_y: usize, n_z: usize, seed: u64) -> IlrDatasets {
    let mut rng = stream_rng(seed, 0);
    let spec = ScenarioSpec::paper(Scenario::S1);
    let (oy, oz) = scenario_covariances(&spec, &mut rng).expect("paper scenario is valid");
    let dist = DistributionSpec::gaussian();
    let y = sample_ilr(&dist, &oy, n_y, &mut rng).expect("positive definite");
    let z = sample_ilr(&dist, &oz, n_z, &mut rng).expect("positive definite");
    IlrDatasets::new(y, z).expect("finite coordinates")
}

/// Random symmetric matrix with entries in [-1, 1].
pub fn random_symmetric(dim: usize, seed: u64) -> SymmetricMatrix {
    use rand_like::uniform;
    let mut state = seed;
    let m = DMatrix::from_fn(dim, dim, |_, _| uniform(&mut state));
    SymmetricMatrix::new(&m + m.transpose()).expect("finite entries")
}

mod rand_like {
    /// SplitMix64 step mapped to [-1, 1].
    pub fn uniform(state: &mut u64) -> f64 {
        *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}
