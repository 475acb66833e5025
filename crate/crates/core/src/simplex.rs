//! Aitchison geometry on the simplex: closure, perturbation, powering, the
//! Aitchison inner product, clr, and pivot (ilr) coordinates.

use nalgebra::DMatrix;

use crate::error::{CodaError, Result};

/// Parts smaller than this are treated as zero; their logarithm would underflow.
pub const PART_FLOOR: f64 = 1e-300;

/// A strictly positive vector of proportions summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition(Vec<f64>);

impl Composition {
    pub fn parts(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        closure(&vec![1.0; dim])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Pivot logratio coordinates of a composition (dimension D - 1).
#[derive(Debug, Clone, PartialEq)]
pub struct IlrVector(Vec<f64>);

impl IlrVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(CodaError::NonFinite {
                context: "ilr coordinates",
            });
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// The D x (D-1) matrix linking clr and pivot coordinates: `ilr(x) = V' clr(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMatrix(DMatrix<f64>);

impl ContrastMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn parts(&self) -> usize {
        self.0.nrows()
    }
}

fn check_same_dim(x: &Composition, y: &Composition) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(CodaError::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(())
}

/// Closure to 1 of a positive vector.
pub fn closure(w: &[f64]) -> Result<Composition> {
    if w.len() < 2 {
        return Err(CodaError::DimensionTooSmall {
            dim: w.len(),
            min: 2,
        });
    }
    for (index, &value) in w.iter().enumerate() {
        if !value.is_finite() {
            return Err(CodaError::NonFinite {
                context: "composition part",
            });
        }
        if value < PART_FLOOR {
            return Err(CodaError::NonPositiveEntry { index, value });
        }
    }
    let total: f64 = w.iter().sum();
    if !total.is_finite() {
        return Err(CodaError::NonFinite {
            context: "composition total",
        });
    }
    let parts: Vec<f64> = w.iter().map(|v| v / total).collect();
    if let Some((index, &value)) = parts.iter().enumerate().find(|(_, &p)| p < PART_FLOOR) {
        return Err(CodaError::NonPositiveEntry { index, value });
    }
    Ok(Composition(parts))
}

/// Closure of `exp(v)`, shifted by the maximum so large coordinates do not overflow.
fn closure_of_exp(v: &[f64]) -> Result<Composition> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = v.iter().map(|a| (a - max).exp()).collect();
    closure(&w)
}

pub fn perturb(x: &Composition, y: &Composition) -> Result<Composition> {
    check_same_dim(x, y)?;
    let w: Vec<f64> = x.0.iter().zip(&y.0).map(|(a, b)| a * b).collect();
    closure(&w)
}

/// Powering `alpha (.) x`, computed in log space.
pub fn power(alpha: f64, x: &Composition) -> Result<Composition> {
    let logs: Vec<f64> = x.0.iter().map(|p| alpha * p.ln()).collect();
    closure_of_exp(&logs)
}

/// Aitchison inner product via its defining double sum over all logratio pairs.
pub fn aitchison_inner(x: &Composition, y: &Composition) -> Result<f64> {
    check_same_dim(x, y)?;
    let d = x.dim();
    let lx: Vec<f64> = x.0.iter().map(|p| p.ln()).collect();
    let ly: Vec<f64> = y.0.iter().map(|p| p.ln()).collect();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += (lx[i] - lx[j]) * (ly[i] - ly[j]);
        }
    }
    Ok(acc / (2.0 * d as f64))
}

pub fn clr(x: &Composition) -> Vec<f64> {
    let logs: Vec<f64> = x.0.iter().map(|p| p.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    logs.into_iter().map(|l| l - mean).collect()
}

/// Pivot coordinates computed from raw log-parts; the caller guarantees
/// every entry is finite and `logs.len() >= 2`.
pub(crate) fn pivot_from_logs(logs: &[f64], out: &mut [f64]) {
    let d = logs.len();
    debug_assert_eq!(out.len(), d - 1);
    // suffix[i] = sum of logs[i..]
    let mut tail = 0.0;
    for i in (0..d - 1).rev() {
        tail += logs[i + 1];
        let rest = (d - i - 1) as f64;
        let coef = (rest / (rest + 1.0)).sqrt();
        out[i] = coef * (logs[i] - tail / rest);
    }
}

/// Pivot (ilr) coordinates.
pub fn ilr(x: &Composition) -> IlrVector {
    let logs: Vec<f64> = x.0.iter().map(|p| p.ln()).collect();
    let mut out = vec![0.0; x.dim() - 1];
    pivot_from_logs(&logs, &mut out);
    IlrVector(out)
}

/// Inverse pivot map, evaluated through the explicit psi components.
pub fn ilr_inv(v: &IlrVector) -> Result<Composition> {
    let p = v.dim();
    if p < 1 {
        return Err(CodaError::DimensionTooSmall { dim: p + 1, min: 2 });
    }
    let d = p + 1;
    let mut psi = vec![0.0; d];
    let mut running = 0.0;
    for (j, &coord) in v.0.iter().enumerate() {
        // 1-based index j+1
        let rest = (d - j - 1) as f64;
        psi[j] = -running + coord * (rest / (rest + 1.0)).sqrt();
        running += coord / ((rest + 1.0) * rest).sqrt();
    }
    psi[d - 1] = -running;
    closure_of_exp(&psi)
}

/// Inverse pivot map through the contrast matrix: `C(exp(V v))`.
pub fn ilr_inv_via_contrast(v: &IlrVector) -> Result<Composition> {
    let basis = contrast_matrix(v.dim() + 1)?;
    let coords = nalgebra::DVector::from_column_slice(v.coords());
    let psi = basis.matrix() * coords;
    closure_of_exp(psi.as_slice())
}

pub fn contrast_matrix(d: usize) -> Result<ContrastMatrix> {
    if d < 2 {
        return Err(CodaError::DimensionTooSmall { dim: d, min: 2 });
    }
    let m = DMatrix::from_fn(d, d - 1, |i, j| {
        let rest = (d - j - 1) as f64;
        let norm = ((rest + 1.0) * rest).sqrt();
        if i == j {
            rest / norm
        } else if i > j {
            -1.0 / norm
        } else {
            0.0
        }
    });
    Ok(ContrastMatrix(m))
}
