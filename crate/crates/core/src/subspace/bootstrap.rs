//! Nonparametric bootstrap null distribution.
//!
//! The Z coordinates are rotated so their principal axes line up with a
//! randomly rotated copy of the Y axes (top `k` block and complement rotated
//! separately). This enforces the null while keeping each group's spectrum.
//! Replicates then resample rows with replacement from Y and rotated Z.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::dataset::IlrDatasets;
use crate::error::{CodaError, Result};
use crate::linalg::{resampled_covariance, sample_covariance, sym_eig_desc};
use crate::random::{haar_rotation, stream_rng};
use crate::subspace::statistic::{breakdown_from_covariances, check_k, check_rows, test_statistic};

/// Stream index reserved for the one-off rotation draw.
const ROTATION_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapOptions {
    pub n_boot: usize,
    pub seed: u64,
    /// Draw a fresh rotation inside every replicate instead of once up front.
    pub rerandomize_rotation: bool,
}

impl BootstrapOptions {
    pub fn new(n_boot: usize, seed: u64) -> Self {
        Self {
            n_boot,
            seed,
            rerandomize_rotation: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOutcome {
    pub p_value: f64,
    pub statistic: f64,
    /// Replicates with `t_b >= t`.
    pub exceedances: usize,
    pub n_boot: usize,
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows() + b.nrows();
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

struct Axes {
    /// `[U, 0; 0, I_Q]`
    u_embedded: DMatrix<f64>,
    /// Eigenvectors of the Z covariance.
    v: DMatrix<f64>,
}

fn sample_axes(ilr: &IlrDatasets) -> Result<Axes> {
    let eig_y = sym_eig_desc(&sample_covariance(ilr.y_tilde())?)?;
    let eig_z = sym_eig_desc(&sample_covariance(ilr.z_tilde())?)?;
    let q = ilr.q();
    Ok(Axes {
        u_embedded: block_diag(&eig_y.vectors, &DMatrix::identity(q, q)),
        v: eig_z.vectors,
    })
}

fn rotate(
    ilr: &IlrDatasets,
    axes: &Axes,
    r1: &DMatrix<f64>,
    r2: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let u_boot = &axes.u_embedded * block_diag(r1, r2);
    let r3 = u_boot * axes.v.transpose();
    (ilr.z_tilde() * r3.transpose(), r3)
}

/// Rotated Z coordinates and the rotation `R3`, for given block rotations
/// `r1` (`k x k`) and `r2` (`(D-k-1) x (D-k-1)`).
pub fn rotated_z_with(
    ilr: &IlrDatasets,
    k: usize,
    r1: &DMatrix<f64>,
    r2: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_k(k, ilr.dim_y())?;
    check_rows(ilr.n_y(), ilr.n_z())?;
    let p = ilr.dim_z();
    if r1.shape() != (k, k) || r2.shape() != (p - k, p - k) {
        return Err(CodaError::DimensionMismatch {
            expected: p,
            found: r1.nrows() + r2.nrows(),
        });
    }
    Ok(rotate(ilr, &sample_axes(ilr)?, r1, r2))
}

/// Rotated Z coordinates with Haar-random block rotations.
pub fn build_rotated_z<R: Rng + ?Sized>(
    ilr: &IlrDatasets,
    k: usize,
    rng: &mut R,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_k(k, ilr.dim_y())?;
    let r1 = haar_rotation(k, rng);
    let r2 = haar_rotation(ilr.dim_z() - k, rng);
    rotated_z_with(ilr, k, &r1, &r2)
}

struct Scratch {
    idx_y: Vec<usize>,
    idx_z: Vec<usize>,
    cov_y: DMatrix<f64>,
    cov_z: DMatrix<f64>,
}

fn replicate_statistic(
    ilr: &IlrDatasets,
    z_boot: &DMatrix<f64>,
    k: usize,
    rng: &mut impl Rng,
    s: &mut Scratch,
) -> Result<f64> {
    let (n_y, n_z) = (ilr.n_y(), ilr.n_z());
    for i in s.idx_y.iter_mut() {
        *i = rng.random_range(0..n_y);
    }
    for i in s.idx_z.iter_mut() {
        *i = rng.random_range(0..n_z);
    }
    resampled_covariance(ilr.y_tilde(), &s.idx_y, &mut s.cov_y);
    resampled_covariance(z_boot, &s.idx_z, &mut s.cov_z);
    Ok(breakdown_from_covariances(&s.cov_y, &s.cov_z, n_y, n_z, k)?.statistic)
}

/// Bootstrap p-value `#{t_b >= t} / n_boot`. Replicate `b` draws from stream
/// `b` of `seed`, so the result does not depend on the thread count.
pub fn bootstrap_p_value(
    ilr: &IlrDatasets,
    k: usize,
    opts: &BootstrapOptions,
) -> Result<BootstrapOutcome> {
    if opts.n_boot == 0 {
        return Err(CodaError::InvalidConfig("n_boot must be at least 1".into()));
    }
    let statistic = test_statistic(ilr, k)?;
    let axes = sample_axes(ilr)?;
    let p = ilr.dim_z();
    let draw_rotation = |rng: &mut crate::random::SimRng| {
        let r1 = haar_rotation(k, rng);
        let r2 = haar_rotation(p - k, rng);
        rotate(ilr, &axes, &r1, &r2).0
    };
    let fixed_z = if opts.rerandomize_rotation {
        None
    } else {
        Some(draw_rotation(&mut stream_rng(opts.seed, ROTATION_STREAM)))
    };

    let (dy, n_y, n_z) = (ilr.dim_y(), ilr.n_y(), ilr.n_z());
    let replicates: Vec<Result<f64>> = (0..opts.n_boot)
        .into_par_iter()
        .map_init(
            || Scratch {
                idx_y: vec![0; n_y],
                idx_z: vec![0; n_z],
                cov_y: DMatrix::zeros(dy, dy),
                cov_z: DMatrix::zeros(p, p),
            },
            |scratch, b| {
                let mut rng = stream_rng(opts.seed, b as u64);
                match &fixed_z {
                    Some(z_boot) => replicate_statistic(ilr, z_boot, k, &mut rng, scratch),
                    None => {
                        let z_boot = draw_rotation(&mut rng);
                        replicate_statistic(ilr, &z_boot, k, &mut rng, scratch)
                    }
                }
            },
        )
        .collect();
    let mut exceedances = 0;
    for t_b in replicates {
        if t_b? >= statistic {
            exceedances += 1;
        }
    }
    Ok(BootstrapOutcome {
        p_value: exceedances as f64 / opts.n_boot as f64,
        statistic,
        exceedances,
        n_boot: opts.n_boot,
    })
}
