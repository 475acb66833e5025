//! Compositional datasets with a block of structural zeros.
//!
//! Rows that are zero on the structural-zero parts form the `Y` block and
//! keep only their `D - Q` positive parts; all other rows form the `Z` block.
//! Columns are reordered so the zero parts come last.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CodaError, Result};
use crate::simplex::{self, closure};

/// Row sums further than this from 1 mark the dataset as renormalized.
pub const CLOSURE_WARN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CompositionalDataset {
    y_rows: DMatrix<f64>,
    z_rows: DMatrix<f64>,
    q: usize,
    part_names: Vec<String>,
    pub provenance: String,
    /// Set when at least one input row did not already sum to 1.
    pub renormalized: bool,
}

impl CompositionalDataset {
    /// Builds a dataset from already-split blocks. Every row is closed; `y_rows`
    /// has `D - Q` columns and `z_rows` has `D`.
    pub fn new(
        y_rows: DMatrix<f64>,
        z_rows: DMatrix<f64>,
        q: usize,
        part_names: Vec<String>,
    ) -> Result<Self> {
        let d = z_rows.ncols();
        if d < 2 {
            return Err(CodaError::DimensionTooSmall { dim: d, min: 2 });
        }
        if q + 2 > d {
            return Err(CodaError::InvalidArgument(format!(
                "q = {q} structural zeros leaves fewer than 2 positive parts out of {d}"
            )));
        }
        if y_rows.ncols() != d - q {
            return Err(CodaError::DimensionMismatch {
                expected: d - q,
                found: y_rows.ncols(),
            });
        }
        if part_names.len() != d {
            return Err(CodaError::DimensionMismatch {
                expected: d,
                found: part_names.len(),
            });
        }
        if z_rows.nrows() == 0 {
            return Err(CodaError::EmptyBlock { block: "Z" });
        }
        if z_rows.nrows() < 2 {
            return Err(CodaError::TooFewRows {
                rows: z_rows.nrows(),
                min: 2,
            });
        }
        if q >= 1 {
            if y_rows.nrows() == 0 {
                return Err(CodaError::EmptyBlock { block: "Y" });
            }
            if y_rows.nrows() < 2 {
                return Err(CodaError::TooFewRows {
                    rows: y_rows.nrows(),
                    min: 2,
                });
            }
        }
        let mut renormalized = false;
        let y_rows = close_rows(&y_rows, &mut renormalized)?;
        let z_rows = close_rows(&z_rows, &mut renormalized)?;
        Ok(Self {
            y_rows,
            z_rows,
            q,
            part_names,
            provenance: String::from("in-memory"),
            renormalized,
        })
    }

    pub fn y_rows(&self) -> &DMatrix<f64> {
        &self.y_rows
    }

    pub fn z_rows(&self) -> &DMatrix<f64> {
        &self.z_rows
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn parts(&self) -> usize {
        self.z_rows.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.y_rows.nrows()
    }

    pub fn n_z(&self) -> usize {
        self.z_rows.nrows()
    }

    /// Part labels, structural-zero parts last.
    pub fn part_names(&self) -> &[String] {
        &self.part_names
    }
}

fn close_rows(rows: &DMatrix<f64>, renormalized: &mut bool) -> Result<DMatrix<f64>> {
    let mut out = rows.clone();
    for r in 0..rows.nrows() {
        let raw: Vec<f64> = rows.row(r).iter().cloned().collect();
        let total: f64 = raw.iter().sum();
        if (total - 1.0).abs() > CLOSURE_WARN_TOL {
            *renormalized = true;
        }
        let closed = closure(&raw)?;
        for (c, v) in closed.parts().iter().enumerate() {
            out[(r, c)] = *v;
        }
    }
    Ok(out)
}

/// Pivot coordinates of both blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct IlrDatasets {
    y_tilde: DMatrix<f64>,
    z_tilde: DMatrix<f64>,
}

impl IlrDatasets {
    /// `y_tilde` is `n_y x (D-Q-1)`, `z_tilde` is `n_z x (D-1)`.
    pub fn new(y_tilde: DMatrix<f64>, z_tilde: DMatrix<f64>) -> Result<Self> {
        if y_tilde.ncols() > z_tilde.ncols() || y_tilde.ncols() == 0 {
            return Err(CodaError::DimensionMismatch {
                expected: z_tilde.ncols(),
                found: y_tilde.ncols(),
            });
        }
        if y_tilde.iter().chain(z_tilde.iter()).any(|v| !v.is_finite()) {
            return Err(CodaError::NonFinite {
                context: "ilr dataset",
            });
        }
        Ok(Self { y_tilde, z_tilde })
    }

    pub fn y_tilde(&self) -> &DMatrix<f64> {
        &self.y_tilde
    }

    pub fn z_tilde(&self) -> &DMatrix<f64> {
        &self.z_tilde
    }

    pub fn n_y(&self) -> usize {
        self.y_tilde.nrows()
    }

    pub fn n_z(&self) -> usize {
        self.z_tilde.nrows()
    }

    /// Dimension of the Y coordinates, `D - Q - 1`.
    pub fn dim_y(&self) -> usize {
        self.y_tilde.ncols()
    }

    /// Dimension of the Z coordinates, `D - 1`.
    pub fn dim_z(&self) -> usize {
        self.z_tilde.ncols()
    }

    pub fn q(&self) -> usize {
        self.dim_z() - self.dim_y()
    }
}

fn pivot_rows(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let d = rows.ncols();
    let mut out = DMatrix::zeros(rows.nrows(), d - 1);
    let mut logs = vec![0.0; d];
    let mut coords = vec![0.0; d - 1];
    for r in 0..rows.nrows() {
        for (c, l) in logs.iter_mut().enumerate() {
            *l = rows[(r, c)].ln();
        }
        simplex::pivot_from_logs(&logs, &mut coords);
        for (c, v) in coords.iter().enumerate() {
            out[(r, c)] = *v;
        }
    }
    out
}

/// Y rows through the `(D-Q)`-part pivot map, Z rows through the `D`-part one.
pub fn ilr_transform_split(ds: &CompositionalDataset) -> Result<IlrDatasets> {
    IlrDatasets::new(pivot_rows(&ds.y_rows), pivot_rows(&ds.z_rows))
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Declared structural-zero parts; overrides automatic detection.
    pub zero_parts: Option<Vec<String>>,
    /// With no structural zeros, the first `n` rows form the Y block.
    pub y_rows_without_zeros: Option<usize>,
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<CompositionalDataset> {
    load_csv_with(path, &LoadOptions::default())
}

pub fn load_csv_with(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<CompositionalDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CodaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut ds = read_csv(file, opts)?;
    ds.provenance = path.display().to_string();
    Ok(ds)
}

fn parse_error(line: usize, message: impl Into<String>) -> CodaError {
    CodaError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses a header of part names followed by non-negative rows. Lines
/// starting with `#` are ignored.
pub fn read_csv<R: Read>(reader: R, opts: &LoadOptions) -> Result<CompositionalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_error(1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let d = header.len();
    if d < 2 {
        return Err(CodaError::DimensionTooSmall { dim: d, min: 2 });
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line_of = |rec: &csv::StringRecord| rec.position().map_or(i + 2, |p| p.line() as usize);
        let record = record.map_err(|e| {
            let line = e.position().map_or(i + 2, |p| p.line() as usize);
            parse_error(line, e.to_string())
        })?;
        let line = line_of(&record);
        if record.len() != d {
            return Err(parse_error(
                line,
                format!("expected {d} fields, found {}", record.len()),
            ));
        }
        let mut row = Vec::with_capacity(d);
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(line, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_error(line, format!("non-finite value: {field:?}")));
            }
            if v < 0.0 {
                return Err(CodaError::NegativeEntry { row: i, column: c });
            }
            row.push(v);
        }
        rows.push(row);
    }
    split_rows(header, rows, opts)
}

fn split_rows(
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
    opts: &LoadOptions,
) -> Result<CompositionalDataset> {
    let d = header.len();
    let zero_set: BTreeSet<usize> = match &opts.zero_parts {
        Some(names) => names
            .iter()
            .map(|name| {
                header.iter().position(|h| h == name).ok_or_else(|| {
                    CodaError::InvalidArgument(format!("unknown zero part {name:?}"))
                })
            })
            .collect::<Result<_>>()?,
        None => rows
            .iter()
            .flat_map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &v)| v == 0.0)
                    .map(|(c, _)| c)
            })
            .collect(),
    };
    let q = zero_set.len();
    if q + 2 > d {
        return Err(CodaError::InconsistentZeroPattern {
            row: 0,
            detail: format!("{q} structural-zero parts leave fewer than 2 positive parts"),
        });
    }
    let keep: Vec<usize> = (0..d).filter(|c| !zero_set.contains(c)).collect();
    let order: Vec<usize> = keep.iter().chain(zero_set.iter()).cloned().collect();
    let part_names: Vec<String> = order.iter().map(|&c| header[c].clone()).collect();

    let mut y = Vec::new();
    let mut z = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        if let Some(c) = keep.iter().find(|&&c| row[c] == 0.0) {
            return Err(CodaError::InconsistentZeroPattern {
                row: r,
                detail: format!(
                    "zero in part {:?} outside the structural-zero set",
                    header[*c]
                ),
            });
        }
        let zeros = zero_set.iter().filter(|&&c| row[c] == 0.0).count();
        if zeros == 0 {
            z.push(order.iter().map(|&c| row[c]).collect::<Vec<_>>());
        } else if zeros == q {
            y.push(keep.iter().map(|&c| row[c]).collect::<Vec<_>>());
        } else {
            return Err(CodaError::InconsistentZeroPattern {
                row: r,
                detail: format!("zero on {zeros} of the {q} structural-zero parts"),
            });
        }
    }

    if q == 0 {
        if let Some(n) = opts.y_rows_without_zeros {
            if n > z.len() {
                return Err(CodaError::InvalidArgument(format!(
                    "{n} Y rows requested but only {} rows present",
                    z.len()
                )));
            }
            y = z.drain(..n).collect();
        }
    } else if y.is_empty() {
        return Err(CodaError::EmptyBlock { block: "Y" });
    }
    if z.is_empty() {
        return Err(CodaError::EmptyBlock { block: "Z" });
    }
    let to_matrix =
        |rows: &[Vec<f64>], cols: usize| DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]);
    CompositionalDataset::new(to_matrix(&y, d - q), to_matrix(&z, d), q, part_names)
}

/// Writes `# q=<Q>`, the reordered header, then Y rows (zero-padded) and Z rows.
pub fn write_csv<W: Write>(ds: &CompositionalDataset, out: W) -> Result<()> {
    let io = |source: std::io::Error| CodaError::Io {
        path: "<output>".into(),
        source,
    };
    let mut out = out;
    writeln!(out, "# q={}", ds.q).map_err(io)?;
    let mut wtr = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CodaError::Io {
        path: "<output>".into(),
        source: std::io::Error::other(e.to_string()),
    };
    wtr.write_record(&ds.part_names).map_err(csv_err)?;
    for r in 0..ds.n_y() {
        let mut fields: Vec<String> = ds.y_rows.row(r).iter().map(|v| v.to_string()).collect();
        fields.extend(std::iter::repeat_n("0".to_string(), ds.q));
        wtr.write_record(&fields).map_err(csv_err)?;
    }
    for r in 0..ds.n_z() {
        let fields: Vec<String> = ds.z_rows.row(r).iter().map(|v| v.to_string()).collect();
        wtr.write_record(&fields).map_err(csv_err)?;
    }
    wtr.flush().map_err(io)?;
    Ok(())
}
