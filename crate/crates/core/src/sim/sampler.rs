use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{CodaError, Result};
use crate::linalg::{cholesky_lower, SymmetricMatrix};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    Student,
    Uniform,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Student => "student",
            Family::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = CodaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "student" | "t" => Ok(Family::Student),
            "uniform" => Ok(Family::Uniform),
            other => Err(CodaError::InvalidArgument(format!(
                "unknown distribution `{other}`"
            ))),
        }
    }
}

/// Zero-mean sampling law whose covariance is the target matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistributionSpec {
    pub family: Family,
    /// Degrees of freedom, required above 2 for the Student family.
    pub dof: Option<u32>,
}

impl DistributionSpec {
    pub fn gaussian() -> Self {
        Self {
            family: Family::Gaussian,
            dof: None,
        }
    }

    pub fn student(dof: u32) -> Self {
        Self {
            family: Family::Student,
            dof: Some(dof),
        }
    }

    pub fn uniform() -> Self {
        Self {
            family: Family::Uniform,
            dof: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.family, self.dof) {
            (Family::Student, Some(nu)) if nu > 2 => Ok(()),
            (Family::Student, Some(nu)) => Err(CodaError::InvalidConfig(format!(
                "student degrees of freedom must exceed 2, got {nu}"
            ))),
            (Family::Student, None) => Err(CodaError::InvalidConfig(
                "student family needs degrees of freedom".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// `n` rows with population covariance `omega`.
pub fn sample_ilr<R: Rng + ?Sized>(
    dist: &DistributionSpec,
    omega: &SymmetricMatrix,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    dist.validate()?;
    if n == 0 {
        return Err(CodaError::InvalidArgument(
            "sample size must be at least 1".into(),
        ));
    }
    let l = cholesky_lower(omega)?;
    let p = omega.dim();
    let mut raw = DMatrix::zeros(n, p);
    match dist.family {
        Family::Gaussian => {
            for r in 0..n {
                for c in 0..p {
                    raw[(r, c)] = rng.sample(StandardNormal);
                }
            }
        }
        Family::Student => {
            let nu = dist.dof.unwrap_or_default() as f64;
            let chi = ChiSquared::new(nu).map_err(|e| CodaError::InvalidConfig(e.to_string()))?;
            // Scale ((nu - 2) / nu) omega makes the covariance omega.
            let scale = ((nu - 2.0) / nu).sqrt();
            for r in 0..n {
                for c in 0..p {
                    raw[(r, c)] = rng.sample::<f64, _>(StandardNormal);
                }
                let w = (chi.sample(rng) / nu).sqrt();
                for c in 0..p {
                    raw[(r, c)] *= scale / w;
                }
            }
        }
        Family::Uniform => {
            for r in 0..n {
                for c in 0..p {
                    raw[(r, c)] = rng.random_range(-SQRT_3..SQRT_3);
                }
            }
        }
    }
    Ok(raw * l.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sample_covariance;
    use crate::random::stream_rng;

    fn max_cov_error(dist: DistributionSpec, omega: &SymmetricMatrix, n: usize, seed: u64) -> f64 {
        let x = sample_ilr(&dist, omega, n, &mut stream_rng(seed, 0)).unwrap();
        (sample_covariance(&x).unwrap().matrix() - omega.matrix()).amax()
    }

    #[test]
    fn gaussian_covariance() {
        assert!(
            max_cov_error(
                DistributionSpec::gaussian(),
                &SymmetricMatrix::identity(2),
                100_000,
                1
            ) <= 0.03
        );
    }

    #[test]
    fn student_covariance() {
        let omega = SymmetricMatrix::from_diagonal(&[2.0, 1.0]);
        assert!(max_cov_error(DistributionSpec::student(4), &omega, 200_000, 2) <= 0.1);
    }

    #[test]
    fn uniform_variance_and_support() {
        let x = sample_ilr(
            &DistributionSpec::uniform(),
            &SymmetricMatrix::identity(1),
            100_000,
            &mut stream_rng(3, 0),
        )
        .unwrap();
        assert!(x.iter().all(|v| v.abs() <= SQRT_3));
        assert!((sample_covariance(&x).unwrap().matrix()[(0, 0)] - 1.0).abs() <= 0.02);
    }

    #[test]
    fn correlated_target_is_reproduced() {
        let omega = SymmetricMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[4.0, 1.0, 0.5, 1.0, 2.0, -0.3, 0.5, -0.3, 1.0],
        ))
        .unwrap();
        for dist in [
            DistributionSpec::gaussian(),
            DistributionSpec::student(8),
            DistributionSpec::uniform(),
        ] {
            assert!(max_cov_error(dist, &omega, 200_000, 4) <= 0.1, "{dist:?}");
        }
    }

    #[test]
    fn error_shrinks_with_sample_size() {
        // Averaging the error over many replicates, quadrupling n halves it.
        let omega = SymmetricMatrix::from_diagonal(&[1.5, 1.0]);
        for dist in [
            DistributionSpec::gaussian(),
            DistributionSpec::student(8),
            DistributionSpec::uniform(),
        ] {
            let avg = |n: usize| -> f64 {
                (0..400)
                    .map(|s| max_cov_error(dist, &omega, n, 100 + s))
                    .sum::<f64>()
                    / 400.0
            };
            let ratio = avg(200) / avg(800);
            assert!((1.6..2.5).contains(&ratio), "{dist:?}: {ratio}");
        }
    }

    #[test]
    fn reproducible_streams() {
        let omega = SymmetricMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        for dist in [
            DistributionSpec::gaussian(),
            DistributionSpec::student(4),
            DistributionSpec::uniform(),
        ] {
            let a = sample_ilr(&dist, &omega, 50, &mut stream_rng(7, 11)).unwrap();
            let b = sample_ilr(&dist, &omega, 50, &mut stream_rng(7, 11)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn invalid_specs() {
        let omega = SymmetricMatrix::identity(2);
        let mut rng = stream_rng(0, 0);
        let no_dof = DistributionSpec {
            family: Family::Student,
            dof: None,
        };
        assert!(sample_ilr(&no_dof, &omega, 5, &mut rng).is_err());
        assert!(sample_ilr(&DistributionSpec::student(2), &omega, 5, &mut rng).is_err());
        assert!(sample_ilr(&DistributionSpec::gaussian(), &omega, 0, &mut rng).is_err());
        let singular = SymmetricMatrix::from_diagonal(&[1.0, 0.0]);
        assert!(matches!(
            sample_ilr(&DistributionSpec::gaussian(), &singular, 5, &mut rng),
            Err(CodaError::NotPositiveDefinite { .. })
        ));
    }
}
