//! Sparse generalized additive models over binarized features with
//! explicit missingness indicators and missingness interactions, fit by
//! l0-penalized exponential loss.
//!
//! The crate is `no_std` (it needs `alloc`). File formats and the
//! command line live in the `mgam` companion crate.

#![no_std]

extern crate alloc;

pub mod augment;
pub mod dataset;
pub mod error;
pub mod eval;
mod linalg;
pub mod model;
pub mod oracle;
pub mod shapes;
pub mod solver;
pub mod synth;
pub mod theory;

pub use augment::{build_augmented, compute_binning, AugmentConfig, AugmentedMatrix, BinningSpec, ColumnKind};
pub use dataset::{split, Cell, Dataset, EncodingMap};
pub use error::{Error, Result};
pub use eval::{accuracy, auc, cross_validate, CvReport, Metric};
pub use model::{exact_sum, Mgam, ModelParams};
pub use solver::{fit, fit_path, fit_warm, FitConfig};
