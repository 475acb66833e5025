//! Scaled chi-square approximation to the null law of the statistic for
//! normally distributed coordinates.
//!
//! `T ~ (sigma2/(2 mu)) chi2([2 mu^2 / sigma2])`, where `mu` and `sigma2` are
//! functions of the group eigenvalues and of the group eigenvectors expressed
//! in the eigenbasis of the pooled matrix. The same routine serves the
//! estimated variant (sample covariances) and the simulation-only variant
//! (true covariances).

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dataset::IlrDatasets;
use crate::error::{CodaError, Result};
use crate::linalg::{sample_covariance, sym_eig_desc, SymmetricMatrix};
use crate::special::chi2_sf;
use crate::subspace::statistic::{check_k, check_rows, pooled_matrix};

/// How the non-integer `2 mu^2 / sigma2` becomes a degrees-of-freedom count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DfRounding {
    #[default]
    Nearest,
    Floor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchottOptions {
    /// Eigengaps below `eigengap_tol * (largest eigenvalue)` are degenerate.
    pub eigengap_tol: f64,
    pub df_rounding: DfRounding,
}

impl Default for SchottOptions {
    fn default() -> Self {
        Self {
            eigengap_tol: 1e-8,
            df_rounding: DfRounding::Nearest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchottNullParams {
    pub mu_t: f64,
    pub sigma2_t: f64,
    pub df: u32,
    pub scale: f64,
}

impl SchottNullParams {
    pub fn from_moments(mu_t: f64, sigma2_t: f64, rounding: DfRounding) -> Result<Self> {
        if !(mu_t > 0.0 && sigma2_t > 0.0 && mu_t.is_finite() && sigma2_t.is_finite()) {
            return Err(CodaError::ApproximationInvalid { mu_t, sigma2_t });
        }
        let raw = 2.0 * mu_t * mu_t / sigma2_t;
        let df = match rounding {
            DfRounding::Nearest => raw.round(),
            DfRounding::Floor => raw.floor(),
        }
        .clamp(1.0, f64::from(u32::MAX)) as u32;
        Ok(Self {
            mu_t,
            sigma2_t,
            df,
            scale: sigma2_t / (2.0 * mu_t),
        })
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.sf(t)
    }

    pub fn sf(&self, t: f64) -> f64 {
        // df >= 1 by construction, so the only error path is a NaN argument.
        chi2_sf(t / self.scale, self.df).unwrap_or(f64::NAN)
    }
}

/// Upper tail of the scaled chi-square at `t`.
pub fn schott_p_value(t: f64, params: &SchottNullParams) -> f64 {
    params.sf(t)
}

/// Eigen-quantities substituted into the moment formulas. Indices follow the
/// pooled eigenbasis: the first `k` rows/columns of the `*1` blocks, the
/// remaining `p - k` of the `*2` blocks.
#[derive(Debug, Clone)]
pub(crate) struct MomentInputs {
    pub k: usize,
    pub n_y: usize,
    pub n_z: usize,
    /// Y eigenvalues padded with zeros to length `p`.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub psi: Vec<f64>,
    pub u1: DMatrix<f64>,
    pub u2: DMatrix<f64>,
    pub v1: DMatrix<f64>,
    pub v2: DMatrix<f64>,
}

/// `G = B diag(lambda) B'` restricted to one diagonal block.
fn weighted_gram(block: &DMatrix<f64>, lambda: &[f64]) -> DMatrix<f64> {
    let n = block.nrows();
    DMatrix::from_fn(n, n, |a, b| {
        (0..block.ncols())
            .map(|s| lambda[s] * block[(a, s)] * block[(b, s)])
            .sum()
    })
}

pub(crate) fn moments(inp: &MomentInputs) -> (f64, f64) {
    let k = inp.k;
    let p = inp.alpha.len();
    let (alpha, beta, psi) = (&inp.alpha, &inp.beta, &inp.psi);
    let wy = (inp.n_y - 1) as f64;
    let wz = (inp.n_z - 1) as f64;
    let pooled_df = (inp.n_y + inp.n_z - 2) as f64;

    let gy1 = weighted_gram(&inp.u1, &alpha[..k]);
    let gy2 = weighted_gram(&inp.u2, &alpha[k..]);
    let gz1 = weighted_gram(&inp.v1, &beta[..k]);
    let gz2 = weighted_gram(&inp.v2, &beta[k..]);

    let mut mu = 0.0;
    let mut var = 0.0;
    for i in 0..k {
        for j in k..p {
            let jj = j - k;
            let a = alpha[i] * alpha[j] / (alpha[i] - alpha[j]);
            let b = beta[i] * beta[j] / (beta[i] - beta[j]);
            let dpsi = psi[i] - psi[j];

            let mut cross_mean = 0.0;
            let mut cross_var = 0.0;
            let mut w_term = 0.0;
            for h in 0..k {
                for l in k..p {
                    let ll = l - k;
                    let uy = inp.u1[(i, h)] * inp.u2[(jj, ll)];
                    let vz = inp.v1[(i, h)] * inp.v2[(jj, ll)];
                    let aa = alpha[h] * alpha[l];
                    let bb = beta[h] * beta[l];
                    cross_mean += wy * uy * uy * aa + wz * vz * vz * bb;
                    cross_var += wy * (aa * uy).powi(2) / (alpha[h] - alpha[l])
                        + wz * (bb * vz).powi(2) / (beta[h] - beta[l]);
                    let w = wy * gy1[(i, h)] * gy2[(jj, ll)] + wz * gz1[(i, h)] * gz2[(jj, ll)];
                    w_term += w * w / (psi[h] - psi[l]);
                }
            }
            mu += a + b - cross_mean / (pooled_df * dpsi);
            var += a * a + b * b - 2.0 * cross_var / (pooled_df * dpsi)
                + w_term / (pooled_df * pooled_df * dpsi);
        }
    }
    (mu, 2.0 * var)
}

/// Fails when the gap between the `k`-th and `(k+1)`-th of the first
/// `len` values is below `tol` times the largest magnitude.
fn check_gap(which: &'static str, values: &[f64], k: usize, len: usize, tol: f64) -> Result<()> {
    if k >= len {
        return Ok(());
    }
    let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = values[k - 1] - values[k];
    if !(gap > tol * top) {
        return Err(CodaError::DegenerateEigengap {
            which,
            i: k,
            j: k + 1,
            gap,
        });
    }
    Ok(())
}

/// How the rotated eigenvector blocks `u*`, `v*` are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Loadings {
    /// Eigenvectors of `K_b' M K_b` for each column block `K_b` of the pooled
    /// eigenbasis. Orthogonal blocks whatever the covariances.
    #[default]
    Projected,
    /// Diagonal blocks of `K' [U 0; 0 I]` and `K' V`. Agrees with `Projected`
    /// when the null holds exactly.
    Direct,
}

/// Eigenvectors of `K_b' M K_b` for one column block `K_b` of the pooled basis.
fn projected_eigenvectors(basis: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let projected = SymmetricMatrix::new(basis.transpose() * m * basis)?;
    Ok(sym_eig_desc(&projected)?.vectors)
}

pub(crate) fn moment_inputs(
    omega_y: &SymmetricMatrix,
    omega_z: &SymmetricMatrix,
    n_y: usize,
    n_z: usize,
    k: usize,
    tol: f64,
    loadings: Loadings,
) -> Result<MomentInputs> {
    check_k(k, omega_y.dim())?;
    check_rows(n_y, n_z)?;
    let p = omega_z.dim();
    let py = omega_y.dim();

    let eig_y = sym_eig_desc(omega_y)?;
    let eig_z = sym_eig_desc(omega_z)?;
    let pooled = pooled_matrix(omega_y, omega_z, n_y, n_z)?;
    let eig_pool = sym_eig_desc(&pooled)?;
    let pooled_df = (n_y + n_z - 2) as f64;

    let mut alpha = eig_y.values.as_slice().to_vec();
    alpha.resize(p, 0.0);
    let beta = eig_z.values.as_slice().to_vec();
    let psi: Vec<f64> = eig_pool.values.iter().map(|g| g / pooled_df).collect();

    check_gap("Y covariance", &alpha, k, py, tol)?;
    check_gap("Z covariance", &beta, k, p, tol)?;
    check_gap("pooled covariance", &psi, k, p, tol)?;

    let k1 = eig_pool.vectors.columns(0, k).clone_owned();
    let k2 = eig_pool.vectors.columns(k, p - k).clone_owned();
    let (u1, u2, v1, v2) = match loadings {
        Loadings::Projected => {
            // The (n - 1) factors do not change eigenvectors.
            let y_embedded = omega_y.embed(p)?;
            (
                projected_eigenvectors(&k1, y_embedded.matrix())?,
                projected_eigenvectors(&k2, y_embedded.matrix())?,
                projected_eigenvectors(&k1, omega_z.matrix())?,
                projected_eigenvectors(&k2, omega_z.matrix())?,
            )
        }
        Loadings::Direct => {
            let mut u_emb = DMatrix::identity(p, p);
            u_emb.view_mut((0, 0), (py, py)).copy_from(&eig_y.vectors);
            let u_star = eig_pool.vectors.transpose() * u_emb;
            let v_star = eig_pool.vectors.transpose() * &eig_z.vectors;
            (
                u_star.view((0, 0), (k, k)).into_owned(),
                u_star.view((k, k), (p - k, p - k)).into_owned(),
                v_star.view((0, 0), (k, k)).into_owned(),
                v_star.view((k, k), (p - k, p - k)).into_owned(),
            )
        }
    };

    Ok(MomentInputs {
        k,
        n_y,
        n_z,
        alpha,
        beta,
        psi,
        u1,
        u2,
        v1,
        v2,
    })
}

/// Null parameters from given covariance matrices of the ilr coordinates,
/// with projected loadings. On sample covariances this is the estimated test.
pub fn schott_params_from_covariances(
    omega_y: &SymmetricMatrix,
    omega_z: &SymmetricMatrix,
    n_y: usize,
    n_z: usize,
    k: usize,
    opts: &SchottOptions,
) -> Result<SchottNullParams> {
    schott_params_with(omega_y, omega_z, n_y, n_z, k, opts, Loadings::Projected)
}

/// Null parameters at known population covariances, with direct loadings.
/// This is the simulation-only theoretical test.
pub fn schott_params_population(
    omega_y: &SymmetricMatrix,
    omega_z: &SymmetricMatrix,
    n_y: usize,
    n_z: usize,
    k: usize,
    opts: &SchottOptions,
) -> Result<SchottNullParams> {
    schott_params_with(omega_y, omega_z, n_y, n_z, k, opts, Loadings::Direct)
}

pub fn schott_params_with(
    omega_y: &SymmetricMatrix,
    omega_z: &SymmetricMatrix,
    n_y: usize,
    n_z: usize,
    k: usize,
    opts: &SchottOptions,
    loadings: Loadings,
) -> Result<SchottNullParams> {
    let inputs = moment_inputs(omega_y, omega_z, n_y, n_z, k, opts.eigengap_tol, loadings)?;
    let (mu, sigma2) = moments(&inputs);
    SchottNullParams::from_moments(mu, sigma2, opts.df_rounding)
}

/// Estimated null parameters from the sample covariances of both blocks.
pub fn schott_null_params(
    ilr: &IlrDatasets,
    k: usize,
    opts: &SchottOptions,
) -> Result<SchottNullParams> {
    check_k(k, ilr.dim_y())?;
    check_rows(ilr.n_y(), ilr.n_z())?;
    let omega_y = sample_covariance(ilr.y_tilde())?;
    let omega_z = sample_covariance(ilr.z_tilde())?;
    schott_params_from_covariances(&omega_y, &omega_z, ilr.n_y(), ilr.n_z(), k, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::stream_rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    /// Rows `+-sqrt(c * (n-1) / 2) e_i`, one coordinate per pair, so the
    /// sample covariance is exactly `diag(c)`.
    fn axis_aligned_rows(diag: &[f64]) -> DMatrix<f64> {
        let p = diag.len();
        let n = 2 * p;
        let mut rows = DMatrix::zeros(n, p);
        for (i, &c) in diag.iter().enumerate() {
            let a = (c * (n - 1) as f64 / 2.0).sqrt();
            rows[(2 * i, i)] = a;
            rows[(2 * i + 1, i)] = -a;
        }
        rows
    }

    /// The moment formulas with every eigenvector matrix equal to the
    /// identity, written out term by term.
    fn diagonal_reduction(
        alpha: &[f64],
        beta: &[f64],
        n_y: usize,
        n_z: usize,
        k: usize,
    ) -> (f64, f64) {
        let p = beta.len();
        let mut a = alpha.to_vec();
        a.resize(p, 0.0);
        let (wy, wz, m) = ((n_y - 1) as f64, (n_z - 1) as f64, (n_y + n_z - 2) as f64);
        let psi: Vec<f64> = (0..p).map(|i| (wy * a[i] + wz * beta[i]) / m).collect();
        let (mut mu, mut var) = (0.0, 0.0);
        for i in 0..k {
            for j in k..p {
                let ra = a[i] * a[j] / (a[i] - a[j]);
                let rb = beta[i] * beta[j] / (beta[i] - beta[j]);
                let c = wy * a[i] * a[j] + wz * beta[i] * beta[j];
                let d = psi[i] - psi[j];
                mu += ra + rb - c / (m * d);
                let cv = wy * (a[i] * a[j]).powi(2) / (a[i] - a[j])
                    + wz * (beta[i] * beta[j]).powi(2) / (beta[i] - beta[j]);
                var += ra * ra + rb * rb - 2.0 * cv / (m * d) + c * c / (m * m * d * d);
            }
        }
        (mu, 2.0 * var)
    }

    #[test]
    fn diagonal_case_matches_reduction() {
        let alpha = [10.0, 9.0, 1.0, 0.8, 0.5];
        let beta = [6.0, 5.0, 1.0, 0.9, 0.3, 0.1, 0.02];
        let y = axis_aligned_rows(&alpha);
        let z = axis_aligned_rows(&beta);
        let ilr = IlrDatasets::new(y, z).unwrap();
        let cy = sample_covariance(ilr.y_tilde()).unwrap();
        assert!(
            (cy.matrix() - DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&alpha)))
                .amax()
                < 1e-12
        );
        for k in 1..=4 {
            let params = schott_null_params(&ilr, k, &SchottOptions::default()).unwrap();
            let (mu, var) = diagonal_reduction(&alpha, &beta, ilr.n_y(), ilr.n_z(), k);
            assert_relative_eq!(params.mu_t, mu, max_relative = 1e-8);
            assert_relative_eq!(params.sigma2_t, var, max_relative = 1e-8);
        }
    }

    #[test]
    fn parameter_plumbing() {
        let p = SchottNullParams::from_moments(1.0, 2.0, DfRounding::Nearest).unwrap();
        assert_eq!((p.df, p.scale), (1, 1.0));
        for &t in &[0.0, 0.3, 1.0, 3.841, 9.0] {
            assert_eq!(schott_p_value(t, &p), chi2_sf(t, 1).unwrap());
        }
        assert_eq!(schott_p_value(0.0, &p), 1.0);
        // 2 * 9 / 4 = 4.5
        let near = SchottNullParams::from_moments(3.0, 4.0, DfRounding::Nearest).unwrap();
        let floor = SchottNullParams::from_moments(3.0, 4.0, DfRounding::Floor).unwrap();
        assert_eq!((near.df, floor.df), (5, 4));
        let tiny = SchottNullParams::from_moments(0.1, 100.0, DfRounding::Nearest).unwrap();
        assert_eq!(tiny.df, 1);
        assert!(SchottNullParams::from_moments(-1.0, 1.0, DfRounding::Nearest).is_err());
        assert!(SchottNullParams::from_moments(1.0, 0.0, DfRounding::Nearest).is_err());
    }

    #[test]
    fn p_value_decreases_in_t() {
        let p = SchottNullParams::from_moments(4.2, 11.3, DfRounding::Nearest).unwrap();
        let mut prev = schott_p_value(0.0, &p);
        for i in 1..200 {
            let cur = schott_p_value(i as f64 * 0.2, &p);
            assert!(cur < prev && cur > 0.0);
            prev = cur;
        }
    }

    #[test]
    fn degenerate_gap_is_reported() {
        let alpha = [3.0, 3.0, 1.0];
        let beta = [6.0, 5.0, 1.0, 0.5, 0.1];
        let ilr = IlrDatasets::new(axis_aligned_rows(&alpha), axis_aligned_rows(&beta)).unwrap();
        let err = schott_null_params(&ilr, 1, &SchottOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            CodaError::DegenerateEigengap {
                which: "Y covariance",
                i: 1,
                j: 2,
                ..
            }
        ));
        assert!(schott_null_params(&ilr, 2, &SchottOptions::default()).is_ok());
    }

    #[test]
    fn moments_ignore_eigenvector_signs() {
        let mut rng = stream_rng(17, 0);
        for _ in 0..50 {
            let y = DMatrix::from_fn(40, 4, |_, c| rng.random_range(-1.0..1.0) * (4.0 - c as f64));
            let z = DMatrix::from_fn(50, 6, |_, c| rng.random_range(-1.0..1.0) * (6.0 - c as f64));
            let cy = sample_covariance(&y).unwrap();
            let cz = sample_covariance(&z).unwrap();
            let base = moment_inputs(&cy, &cz, 40, 50, 2, 1e-8, Loadings::Projected).unwrap();
            let (mu, var) = moments(&base);
            let mut flipped = base.clone();
            for m in [
                &mut flipped.u1,
                &mut flipped.u2,
                &mut flipped.v1,
                &mut flipped.v2,
            ] {
                for c in 0..m.ncols() {
                    if rng.random_bool(0.5) {
                        m.column_mut(c).neg_mut();
                    }
                }
            }
            let (mu_f, var_f) = moments(&flipped);
            assert_relative_eq!(mu, mu_f, max_relative = 1e-12);
            assert_relative_eq!(var, var_f, max_relative = 1e-12);
        }
    }

    #[test]
    fn loadings_agree_under_the_null_only() {
        use crate::sim::{scenario_covariances, Scenario, ScenarioSpec};
        let opts = SchottOptions::default();
        for seed in 0..20 {
            let spec = ScenarioSpec::paper(Scenario::S1);
            let (oy, oz) = scenario_covariances(&spec, &mut stream_rng(seed, 0)).unwrap();
            let direct = schott_params_population(&oy, &oz, 100, 100, 2, &opts).unwrap();
            let projected = schott_params_from_covariances(&oy, &oz, 100, 100, 2, &opts).unwrap();
            assert_relative_eq!(direct.mu_t, projected.mu_t, max_relative = 1e-9);
            assert_relative_eq!(direct.sigma2_t, projected.sigma2_t, max_relative = 1e-9);
        }
        let spec = ScenarioSpec::paper(Scenario::S3);
        let (oy, oz) = scenario_covariances(&spec, &mut stream_rng(1, 0)).unwrap();
        let direct = schott_params_population(&oy, &oz, 20, 20, 2, &opts).unwrap();
        let projected = schott_params_with(&oy, &oz, 20, 20, 2, &opts, Loadings::Projected);
        assert!(projected.map_or(true, |p| (p.mu_t - direct.mu_t).abs() > 1e-6));
    }
}
