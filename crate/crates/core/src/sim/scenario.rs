use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{CodaError, Result};
use crate::linalg::SymmetricMatrix;
use crate::random::{haar_orthonormal, haar_rotation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Top-`k` subspaces coincide.
    S1,
    /// Only the leading direction is shared.
    S2,
    /// Independent eigenbases.
    S3,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::S1 => "s1",
            Scenario::S2 => "s2",
            Scenario::S3 => "s3",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = CodaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(Scenario::S1),
            "s2" => Ok(Scenario::S2),
            "s3" => Ok(Scenario::S3),
            other => Err(CodaError::InvalidArgument(format!(
                "unknown scenario `{other}`"
            ))),
        }
    }
}

pub const PAPER_ALPHA: [f64; 5] = [10.0, 9.0, 1.0, 1.0, 0.5];
pub const PAPER_BETA: [f64; 7] = [6.0, 5.0, 1.0, 0.9, 0.3, 0.1, 0.02];

/// Population eigenstructure of one simulation scenario. `alpha` has
/// `d - q - 1` entries, `beta` has `d - 1`, both non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub d: usize,
    pub q: usize,
    /// Dimension of the shared subspace under S1.
    pub k: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ScenarioSpec {
    /// D = 8, Q = 2, K = 2 with the study's eigenvalues.
    pub fn paper(scenario: Scenario) -> Self {
        Self {
            scenario,
            d: 8,
            q: 2,
            k: 2,
            alpha: PAPER_ALPHA.to_vec(),
            beta: PAPER_BETA.to_vec(),
        }
    }

    pub fn dim_y(&self) -> usize {
        self.d - self.q - 1
    }

    pub fn dim_z(&self) -> usize {
        self.d - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 3 || self.q + 2 > self.d {
            return Err(CodaError::InvalidConfig(format!(
                "need D >= 3 and Q <= D - 2, got D = {}, Q = {}",
                self.d, self.q
            )));
        }
        for (name, values, len) in [
            ("alpha", &self.alpha, self.dim_y()),
            ("beta", &self.beta, self.dim_z()),
        ] {
            if values.len() != len {
                return Err(CodaError::InvalidConfig(format!(
                    "{name} needs {len} eigenvalues, got {}",
                    values.len()
                )));
            }
            if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(CodaError::InvalidConfig(format!(
                    "{name} must be positive and finite"
                )));
            }
            if values.windows(2).any(|w| w[0] < w[1]) {
                return Err(CodaError::InvalidConfig(format!(
                    "{name} must be non-increasing"
                )));
            }
            if self.k < len && values[self.k - 1] <= values[self.k] {
                return Err(CodaError::InvalidConfig(format!(
                    "{name} needs a strict gap after position {}",
                    self.k
                )));
            }
        }
        if self.k == 0 || self.k > self.dim_y() {
            return Err(CodaError::BadK {
                k: self.k,
                max: self.dim_y(),
            });
        }
        Ok(())
    }
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows() + b.nrows();
    let mut m = DMatrix::zeros(n, n);
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut(a.shape(), b.shape()).copy_from(b);
    m
}

fn spectral(vectors: &DMatrix<f64>, values: &[f64]) -> Result<SymmetricMatrix> {
    let scaled = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, c| {
        vectors[(r, c)] * values[c]
    });
    SymmetricMatrix::new(scaled * vectors.transpose())
}

/// Eigenbases `(U, V)` of one scenario draw.
pub fn scenario_bases<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    rng: &mut R,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    spec.validate()?;
    let (py, pz) = (spec.dim_y(), spec.dim_z());
    let u = haar_orthonormal(py, rng);
    let u_emb = block_diag(&u, &DMatrix::identity(spec.q, spec.q));
    let v = match spec.scenario {
        Scenario::S1 => {
            let r1 = haar_rotation(spec.k, rng);
            let r2 = haar_rotation(pz - spec.k, rng);
            u_emb * block_diag(&r1, &r2)
        }
        Scenario::S2 => {
            let r = haar_rotation(pz - 1, rng);
            u_emb * block_diag(&DMatrix::identity(1, 1), &r)
        }
        Scenario::S3 => haar_orthonormal(pz, rng),
    };
    Ok((u, v))
}

/// `U diag(alpha) U'` and `V diag(beta) V'` for a fresh draw of the bases.
pub fn scenario_covariances<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    rng: &mut R,
) -> Result<(SymmetricMatrix, SymmetricMatrix)> {
    let (u, v) = scenario_bases(spec, rng)?;
    Ok((spectral(&u, &spec.alpha)?, spectral(&v, &spec.beta)?))
}
