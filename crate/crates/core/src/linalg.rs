//! Small dense symmetric linear algebra: sample covariance, a cyclic Jacobi
//! eigen-solver with deterministic ordering and signs, and Cholesky.

use nalgebra::{DMatrix, DVector};

use crate::error::{CodaError, Result};

pub const MAX_SWEEPS: usize = 100;
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// A square matrix symmetrized on construction as `(M + M') / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(CodaError::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(CodaError::NonFinite {
                context: "symmetric matrix",
            });
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self(sym))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(values: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Zero-pads to `dim x dim`, keeping `self` in the top-left block.
    pub fn embed(&self, dim: usize) -> Result<SymmetricMatrix> {
        if dim < self.dim() {
            return Err(CodaError::DimensionMismatch {
                expected: self.dim(),
                found: dim,
            });
        }
        let mut out = DMatrix::zeros(dim, dim);
        out.view_mut((0, 0), (self.dim(), self.dim()))
            .copy_from(&self.0);
        Ok(SymmetricMatrix(out))
    }

    /// `Q M Q'` for any conformable `Q`.
    pub fn congruence(&self, q: &DMatrix<f64>) -> Result<SymmetricMatrix> {
        if q.ncols() != self.dim() {
            return Err(CodaError::DimensionMismatch {
                expected: self.dim(),
                found: q.ncols(),
            });
        }
        SymmetricMatrix::new(q * &self.0 * q.transpose())
    }
}

/// Eigenvalues in non-increasing order with orthonormal, sign-normalized
/// eigenvectors stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }
}

/// Mean-centred cross-products over `n - 1`.
pub fn sample_covariance(rows: &DMatrix<f64>) -> Result<SymmetricMatrix> {
    let n = rows.nrows();
    if n < 2 {
        return Err(CodaError::TooFewRows { rows: n, min: 2 });
    }
    let p = rows.ncols();
    let mut cov = DMatrix::zeros(p, p);
    covariance_into(p, n, |r, c| rows[(r, c)], &mut cov);
    SymmetricMatrix::new(cov)
}

/// Covariance of the rows of `data` selected (with repetition) by `index`.
pub(crate) fn resampled_covariance(data: &DMatrix<f64>, index: &[usize], out: &mut DMatrix<f64>) {
    covariance_into(data.ncols(), index.len(), |r, c| data[(index[r], c)], out);
}

fn covariance_into<F: Fn(usize, usize) -> f64>(p: usize, n: usize, get: F, out: &mut DMatrix<f64>) {
    let mut mean = vec![0.0; p];
    for r in 0..n {
        for (c, m) in mean.iter_mut().enumerate() {
            *m += get(r, c);
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    out.fill(0.0);
    let mut centred = vec![0.0; p];
    for r in 0..n {
        for c in 0..p {
            centred[c] = get(r, c) - mean[c];
        }
        for a in 0..p {
            for b in 0..=a {
                out[(a, b)] += centred[a] * centred[b];
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..p {
        for b in 0..=a {
            let v = out[(a, b)] / denom;
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
}

/// Cyclic Jacobi rotations on `a` (destroyed). Returns the unsorted diagonal;
/// accumulates rotations into `vectors` when given.
fn jacobi(a: &mut DMatrix<f64>, mut vectors: Option<&mut DMatrix<f64>>) -> Result<Vec<f64>> {
    let n = a.nrows();
    let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 || n == 1 {
        return Ok((0..n).map(|i| a[(i, i)]).collect());
    }
    let tol = OFF_DIAGONAL_TOL * scale;
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if (2.0 * off).sqrt() <= tol {
            return Ok((0..n).map(|i| a[(i, i)]).collect());
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                if let Some(v) = vectors.as_deref_mut() {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    Err(CodaError::ConvergenceFailure { sweeps: MAX_SWEEPS })
}

/// Indices that sort `values` descending; equal values keep solver order.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    order
}

/// Full symmetric eigendecomposition, values descending. Each eigenvector is
/// flipped so its largest-magnitude entry (first one on ties) is positive.
pub fn sym_eig_desc(m: &SymmetricMatrix) -> Result<EigenDecomposition> {
    let n = m.dim();
    let mut work = m.0.clone();
    let mut vecs = DMatrix::identity(n, n);
    let diag = jacobi(&mut work, Some(&mut vecs))?;
    let order = descending_order(&diag);
    let values = DVector::from_iterator(n, order.iter().map(|&i| diag[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = vecs.column(src).clone_owned();
        let mut pivot = 0;
        for r in 1..n {
            if col[r].abs() > col[pivot].abs() {
                pivot = r;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues_desc(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let mut work = m.clone();
    let mut values = jacobi(&mut work, None)?;
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Lower-triangular `L` with `L L' = m`.
pub fn cholesky_lower(m: &SymmetricMatrix) -> Result<DMatrix<f64>> {
    let n = m.dim();
    let a = &m.0;
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(CodaError::NotPositiveDefinite {
                pivot: j,
                value: diag,
            });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}
