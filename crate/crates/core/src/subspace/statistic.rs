use nalgebra::DMatrix;

use crate::dataset::IlrDatasets;
use crate::error::{CodaError, Result};
use crate::linalg::{sample_covariance, sym_eigenvalues_desc, SymmetricMatrix};

/// `(n_y - 1) [omega_y, 0; 0, 0] + (n_z - 1) omega_z`.
pub fn pooled_matrix(
    omega_y: &SymmetricMatrix,
    omega_z: &SymmetricMatrix,
    n_y: usize,
    n_z: usize,
) -> Result<SymmetricMatrix> {
    if omega_y.dim() > omega_z.dim() {
        return Err(CodaError::DimensionMismatch {
            expected: omega_z.dim(),
            found: omega_y.dim(),
        });
    }
    check_rows(n_y, n_z)?;
    let pooled = pooled_raw(omega_y.matrix(), omega_z.matrix(), n_y, n_z);
    SymmetricMatrix::new(pooled)
}

pub(crate) fn pooled_raw(
    omega_y: &DMatrix<f64>,
    omega_z: &DMatrix<f64>,
    n_y: usize,
    n_z: usize,
) -> DMatrix<f64> {
    let py = omega_y.nrows();
    let mut pooled = omega_z * (n_z - 1) as f64;
    let wy = (n_y - 1) as f64;
    for r in 0..py {
        for c in 0..py {
            pooled[(r, c)] += wy * omega_y[(r, c)];
        }
    }
    pooled
}

pub(crate) fn check_rows(n_y: usize, n_z: usize) -> Result<()> {
    for n in [n_y, n_z] {
        if n < 2 {
            return Err(CodaError::TooFewRows { rows: n, min: 2 });
        }
    }
    Ok(())
}

pub(crate) fn check_k(k: usize, dim_y: usize) -> Result<()> {
    if k == 0 || k > dim_y {
        return Err(CodaError::BadK { k, max: dim_y });
    }
    Ok(())
}

/// Eigenvalues entering the statistic, all sorted descending.
#[derive(Debug, Clone)]
pub struct StatisticBreakdown {
    pub statistic: f64,
    /// Eigenvalues of the Y covariance (length `D-Q-1`).
    pub alpha: Vec<f64>,
    /// Eigenvalues of the Z covariance (length `D-1`).
    pub beta: Vec<f64>,
    /// Eigenvalues of the weighted pooled sum (length `D-1`).
    pub gamma: Vec<f64>,
}

pub(crate) fn breakdown_from_covariances(
    omega_y: &DMatrix<f64>,
    omega_z: &DMatrix<f64>,
    n_y: usize,
    n_z: usize,
    k: usize,
) -> Result<StatisticBreakdown> {
    let alpha = sym_eigenvalues_desc(omega_y)?;
    let beta = sym_eigenvalues_desc(omega_z)?;
    let gamma = sym_eigenvalues_desc(&pooled_raw(omega_y, omega_z, n_y, n_z))?;
    let (wy, wz) = ((n_y - 1) as f64, (n_z - 1) as f64);
    let statistic = (0..k)
        .map(|i| wy * alpha[i] + wz * beta[i] - gamma[i])
        .sum();
    Ok(StatisticBreakdown {
        statistic,
        alpha,
        beta,
        gamma,
    })
}

pub fn statistic_breakdown(ilr: &IlrDatasets, k: usize) -> Result<StatisticBreakdown> {
    check_k(k, ilr.dim_y())?;
    check_rows(ilr.n_y(), ilr.n_z())?;
    let omega_y = sample_covariance(ilr.y_tilde())?;
    let omega_z = sample_covariance(ilr.z_tilde())?;
    breakdown_from_covariances(omega_y.matrix(), omega_z.matrix(), ilr.n_y(), ilr.n_z(), k)
}

/// Sum over the top `k` eigenvalues of `(n_y-1) a_i + (n_z-1) b_i - g_i`.
/// Nonnegative up to rounding by the Ky Fan inequality.
pub fn test_statistic(ilr: &IlrDatasets, k: usize) -> Result<f64> {
    statistic_breakdown(ilr, k).map(|b| b.statistic)
}
