//! Choosing the number of clusters for k-means by cross-validation.
//!
//! The main entry points are [`gabriel::gabriel_select_k`] (bi-cross-validation
//! over row and column folds), its correlation-corrected form
//! [`gabriel::gabriel_select_k_corrected`], and the speckled-holdout baseline
//! [`wold::wold_select_k`]. [`selector::SelectorRegistry`] exposes them by name.

// `!(x > 0.0)` guards are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod error;
pub mod evaluation;
pub mod fmt;
pub mod gabriel;
pub mod kmeans;
pub mod linalg;
pub mod matrix;
pub mod report;
pub mod rng;
pub mod selector;
pub mod simgen;
pub mod theory;
pub mod wold;

pub use error::{Error, Result};
pub use matrix::DataMatrix;
pub use report::{CvReport, FoldId};
