//! Testing for a common principal-component subspace between two compositional
//! datasets, one of which carries structural zeros.
//!
//! Data flow: [`dataset`] loads and splits the compositions, [`simplex`] maps
//! them to pivot coordinates, and [`subspace`] computes the statistic and its
//! p-value by the scaled chi-square null approximation or the bootstrap.
//! [`sim`] reproduces the simulation study.

pub mod dataset;
pub mod error;
pub mod linalg;
pub mod random;
pub mod sim;
pub mod simplex;
pub mod special;
pub mod subspace;

pub use dataset::{
    ilr_transform_split, load_csv, load_csv_with, CompositionalDataset, IlrDatasets, LoadOptions,
};
pub use error::{CodaError, Result};
pub use linalg::{
    cholesky_lower, sample_covariance, sym_eig_desc, EigenDecomposition, SymmetricMatrix,
};
pub use simplex::{Composition, ContrastMatrix, IlrVector};
pub use special::chi2_sf;
pub use subspace::{run_test, run_test_ilr, Method, MethodChoice, SubspaceTestConfig, TestResult};
