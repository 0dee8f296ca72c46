//! Cross-validation results: per-`k`, per-fold errors and the selected `k`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fmt::sig6;

/// A fold coordinate: row subset `r` held out as test rows, column subset
/// `s` used as responses. Speckled (Wold) folds use `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FoldId {
    pub r: usize,
    pub s: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub method: String,
    pub k_grid: Vec<usize>,
    pub folds: Vec<FoldId>,
    /// `errors[i][f]` is the error for `k_grid[i]` on `folds[f]`.
    pub errors: Vec<Vec<f64>>,
    pub mean_error: Vec<f64>,
    pub selected_k: usize,
    pub corrected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl CvReport {
    /// Build a report, averaging over folds and picking the `k` with the
    /// smallest mean error (smallest `k` among exact ties).
    pub fn new(method: impl Into<String>, k_grid: Vec<usize>, folds: Vec<FoldId>, errors: Vec<Vec<f64>>) -> Result<Self> {
        if k_grid.is_empty() || folds.is_empty() {
            return Err(invalid("report needs at least one k and one fold"));
        }
        if errors.len() != k_grid.len() || errors.iter().any(|row| row.len() != folds.len()) {
            return Err(invalid("error table shape does not match k grid and folds"));
        }
        let mean_error: Vec<f64> = errors
            .iter()
            .map(|row| row.iter().sum::<f64>() / row.len() as f64)
            .collect();
        let selected_k = select_k(&k_grid, &mean_error);
        Ok(Self {
            method: method.into(),
            k_grid,
            folds,
            errors,
            mean_error,
            selected_k,
            corrected: false,
            warning: None,
        })
    }

    pub fn mean_error_for(&self, k: usize) -> Option<f64> {
        self.k_grid.iter().position(|&g| g == k).map(|i| self.mean_error[i])
    }

    pub fn errors_for(&self, k: usize) -> Option<&[f64]> {
        self.k_grid.iter().position(|&g| g == k).map(|i| self.errors[i].as_slice())
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Long format: one `(k, fold_r, fold_s, cv_error)` row per cell.
    pub fn write_long_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["k", "fold_r", "fold_s", "cv_error"])?;
        for (k, row) in self.k_grid.iter().zip(&self.errors) {
            for (fold, err) in self.folds.iter().zip(row) {
                wtr.write_record([k.to_string(), fold.r.to_string(), fold.s.to_string(), sig6(*err)])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Compact per-`k` summary `(k, mean_error)`.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["k", "mean_cv_error", "selected"])?;
        for (k, m) in self.k_grid.iter().zip(&self.mean_error) {
            let flag = if *k == self.selected_k { "1" } else { "0" };
            wtr.write_record([k.to_string(), sig6(*m), flag.to_owned()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Argmin of `mean_error` over `k_grid`, smallest `k` on ties.
pub fn select_k(k_grid: &[usize], mean_error: &[f64]) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (&k, &e) in k_grid.iter().zip(mean_error) {
        best = match best {
            Some((bk, be)) if be < e || (be == e && bk < k) => Some((bk, be)),
            _ => Some((k, e)),
        };
    }
    best.expect("non-empty grid").0
}
