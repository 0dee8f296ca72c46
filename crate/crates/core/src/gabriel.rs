//! Bi-cross-validation for the number of clusters.
//!
//! Rows are split into `K` groups and columns into `L` groups. For fold
//! `(r, s)`, rows in group `r` are held out and the columns in group `s`
//! act as responses `Y`; the remaining columns are predictors `X`. k-means
//! on the training responses yields labels and centers; a nearest-centroid
//! classifier on the training predictors learns those labels and assigns
//! each held-out row, whose response is then predicted by the center of
//! its assigned cluster.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::CentroidClassifier;
use crate::error::{invalid, Error, Result};
use crate::kmeans::{kmeans_fit, KMeansParams};
use crate::linalg::{haar_orthogonal, pooled_noise_covariance, symmetric_eig, whiten_transform, DEFAULT_EIGEN_FLOOR};
use crate::matrix::DataMatrix;
use crate::report::{CvReport, FoldId};
use crate::rng::{fork, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GabrielConfig {
    pub row_folds: usize,
    pub col_folds: usize,
    pub kmeans: KMeansParams,
    /// Relative eigenvalue floor used by the correlation correction.
    pub eigen_floor: f64,
}

impl Default for GabrielConfig {
    fn default() -> Self {
        Self { row_folds: 5, col_folds: 2, kmeans: KMeansParams::default(), eigen_floor: DEFAULT_EIGEN_FLOOR }
    }
}

/// Row and column partitions. Each subset is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    n_rows: usize,
    n_cols: usize,
    row_subsets: Vec<Vec<usize>>,
    col_subsets: Vec<Vec<usize>>,
}

/// Split `0..n` into `parts` random groups whose sizes differ by at most one.
fn balanced_partition<R: Rng + ?Sized>(n: usize, parts: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut out = vec![Vec::with_capacity(n / parts + 1); parts];
    for (pos, i) in idx.into_iter().enumerate() {
        out[pos % parts].push(i);
    }
    for s in &mut out {
        s.sort_unstable();
    }
    out
}

fn check_partition(n: usize, subsets: &[Vec<usize>], what: &str) -> Result<()> {
    if subsets.len() < 2 {
        return Err(invalid(format!("need at least 2 {what} subsets")));
    }
    let mut seen = vec![false; n];
    for s in subsets {
        if s.is_empty() {
            return Err(invalid(format!("empty {what} subset")));
        }
        for &i in s {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(invalid(format!("{what} subsets do not partition 0..{n}")));
            }
        }
    }
    if seen.iter().any(|&b| !b) {
        return Err(invalid(format!("{what} subsets do not cover 0..{n}")));
    }
    Ok(())
}

impl FoldPlan {
    /// Random balanced partition into `row_folds x col_folds` folds.
    pub fn random<R: Rng + ?Sized>(
        n_rows: usize,
        n_cols: usize,
        row_folds: usize,
        col_folds: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if row_folds < 2 || row_folds > n_rows {
            return Err(invalid(format!("row folds must lie in 2..={n_rows}, got {row_folds}")));
        }
        if col_folds < 2 || col_folds > n_cols {
            return Err(invalid(format!(
                "column folds must lie in 2..={n_cols}, got {col_folds} (at least two columns are needed)"
            )));
        }
        let row_subsets = balanced_partition(n_rows, row_folds, rng);
        let col_subsets = balanced_partition(n_cols, col_folds, rng);
        Ok(Self { n_rows, n_cols, row_subsets, col_subsets })
    }

    /// Random row partition with fixed column subsets.
    pub fn with_columns<R: Rng + ?Sized>(
        n_rows: usize,
        row_folds: usize,
        col_subsets: Vec<Vec<usize>>,
        rng: &mut R,
    ) -> Result<Self> {
        if row_folds < 2 || row_folds > n_rows {
            return Err(invalid(format!("row folds must lie in 2..={n_rows}, got {row_folds}")));
        }
        let row_subsets = balanced_partition(n_rows, row_folds, rng);
        let n_cols = col_subsets.iter().map(Vec::len).sum();
        Self::from_subsets(n_rows, n_cols, row_subsets, col_subsets)
    }

    pub fn from_subsets(
        n_rows: usize,
        n_cols: usize,
        mut row_subsets: Vec<Vec<usize>>,
        mut col_subsets: Vec<Vec<usize>>,
    ) -> Result<Self> {
        check_partition(n_rows, &row_subsets, "row")?;
        check_partition(n_cols, &col_subsets, "column")?;
        row_subsets.iter_mut().for_each(|s| s.sort_unstable());
        col_subsets.iter_mut().for_each(|s| s.sort_unstable());
        Ok(Self { n_rows, n_cols, row_subsets, col_subsets })
    }

    pub fn row_subsets(&self) -> &[Vec<usize>] {
        &self.row_subsets
    }

    pub fn col_subsets(&self) -> &[Vec<usize>] {
        &self.col_subsets
    }

    /// All folds in row-major order.
    pub fn folds(&self) -> Vec<FoldId> {
        (0..self.row_subsets.len())
            .flat_map(|r| (0..self.col_subsets.len()).map(move |s| FoldId { r, s }))
            .collect()
    }

    /// Smallest training-row count over all folds.
    pub fn min_train_rows(&self) -> usize {
        self.n_rows - self.row_subsets.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Extract the four blocks of `fold`.
    pub fn view(&self, data: &DataMatrix, fold: FoldId) -> Result<FoldView> {
        if data.nrows() != self.n_rows || data.ncols() != self.n_cols {
            return Err(invalid("fold plan does not match data shape"));
        }
        let test_rows = self
            .row_subsets
            .get(fold.r)
            .ok_or_else(|| invalid(format!("no row subset {}", fold.r)))?;
        let y_cols = self
            .col_subsets
            .get(fold.s)
            .ok_or_else(|| invalid(format!("no column subset {}", fold.s)))?;
        let train_rows = complement(self.n_rows, test_rows);
        let x_cols = complement(self.n_cols, y_cols);
        let v = data.values();
        let block = |rows: &[usize], cols: &[usize]| v.select(Axis(0), rows).select(Axis(1), cols);
        Ok(FoldView {
            x_train: block(&train_rows, &x_cols),
            y_train: block(&train_rows, y_cols),
            x_test: block(test_rows, &x_cols),
            y_test: block(test_rows, y_cols),
        })
    }
}

fn complement(n: usize, subset: &[usize]) -> Vec<usize> {
    let mut keep = vec![true; n];
    for &i in subset {
        keep[i] = false;
    }
    (0..n).filter(|&i| keep[i]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldView {
    pub x_train: Array2<f64>,
    pub y_train: Array2<f64>,
    pub x_test: Array2<f64>,
    pub y_test: Array2<f64>,
}

/// Mean squared prediction error of the held-out responses for one fold
/// and one `k`: `(1/m) Σ ||y_i - ŷ_i||²` over the `m` test rows.
pub fn fold_cv_error<R: Rng + ?Sized>(view: &FoldView, k: usize, params: KMeansParams, rng: &mut R) -> Result<f64> {
    let model = kmeans_fit(view.y_train.view(), k, params, rng)?;
    let clf = CentroidClassifier::fit(view.x_train.view(), &model.labels, k)?;
    let m = view.x_test.nrows();
    let mut total = 0.0;
    for (x, y) in view.x_test.outer_iter().zip(view.y_test.outer_iter()) {
        let g = clf.predict(x, rng);
        let center = model.centers.row(g);
        total += y.iter().zip(center.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / m as f64)
}

fn normalize_grid(k_grid: &[usize]) -> Result<Vec<usize>> {
    let mut grid = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    match grid.first() {
        None => Err(invalid("k grid is empty")),
        Some(0) => Err(invalid("k must be at least 1")),
        _ => Ok(grid),
    }
}

/// Evaluate every `k` in `k_grid` on the given folds of `plan`. Each
/// `(fold, k)` cell draws from its own stream derived from `seed`, so the
/// result does not depend on thread scheduling.
pub fn cross_validate_plan(
    data: &DataMatrix,
    plan: &FoldPlan,
    folds: &[FoldId],
    k_grid: &[usize],
    params: KMeansParams,
    seed: u64,
) -> Result<CvReport> {
    data.require_complete("bi-cross-validation")?;
    let grid = normalize_grid(k_grid)?;
    if folds.is_empty() {
        return Err(invalid("no folds to evaluate"));
    }
    let views: Vec<FoldView> = folds.iter().map(|&f| plan.view(data, f)).collect::<Result<_>>()?;
    let k_max = *grid.last().expect("non-empty grid");
    if let Some(small) = views.iter().map(|v| v.x_train.nrows()).min().filter(|&n| n < k_max) {
        return Err(invalid(format!("k = {k_max} exceeds the {small} training rows of the smallest fold")));
    }
    let cells: Vec<(usize, usize)> = (0..grid.len()).flat_map(|ki| (0..folds.len()).map(move |f| (ki, f))).collect();
    let flat: Vec<f64> = cells
        .par_iter()
        .map(|&(ki, f)| {
            let k = grid[ki];
            let mut rng = stream(seed, &[folds[f].r as u64, folds[f].s as u64, k as u64]);
            fold_cv_error(&views[f], k, params, &mut rng)
        })
        .collect::<Result<_>>()?;
    let errors: Vec<Vec<f64>> = flat.chunks(folds.len()).map(<[f64]>::to_vec).collect();
    CvReport::new("gabriel", grid, folds.to_vec(), errors)
}

/// Choose `k` by bi-cross-validation over a fresh random fold plan.
pub fn gabriel_select_k<R: Rng + ?Sized>(
    data: &DataMatrix,
    k_grid: &[usize],
    config: &GabrielConfig,
    rng: &mut R,
) -> Result<CvReport> {
    data.require_complete("bi-cross-validation")?;
    let base = fork(rng);
    let plan = FoldPlan::random(data.nrows(), data.ncols(), config.row_folds, config.col_folds, &mut stream(base, &[0]))?;
    cross_validate_plan(data, &plan, &plan.folds(), k_grid, config.kmeans, rng_seed(base, 1))
}

fn rng_seed(base: u64, tag: u64) -> u64 {
    crate::rng::derive_seed(base, &[tag])
}

/// Outcome of the two-stage, correlation-corrected procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedOutcome {
    /// Uncorrected first stage; its selection fixes the noise model.
    pub first_stage: CvReport,
    /// Second stage on decorrelated data, or a copy of the first stage with
    /// a warning when the noise covariance could not be used.
    pub report: CvReport,
    /// Pooled within-cluster covariance estimate, when it was computed.
    pub sigma_hat: Option<Array2<f64>>,
}

/// Run the selection once, estimate the noise covariance from a full-data
/// clustering at the selected `k`, transform the data to remove that
/// correlation (with a random rotation), and rerun the selection.
pub fn gabriel_select_k_corrected<R: Rng + ?Sized>(
    data: &DataMatrix,
    k_grid: &[usize],
    config: &GabrielConfig,
    rng: &mut R,
) -> Result<CorrectedOutcome> {
    let base = fork(rng);
    let first_stage = gabriel_select_k(data, k_grid, config, &mut stream(base, &[10]))?;
    let k0 = first_stage.selected_k;
    let fallback = |first_stage: CvReport, sigma_hat, why: String| {
        let mut report = first_stage.clone();
        report.warning = Some(format!("correlation correction skipped: {why}"));
        Ok(CorrectedOutcome { first_stage, report, sigma_hat })
    };
    if data.nrows() <= k0 {
        return fallback(first_stage, None, format!("{} rows leave no residual degrees of freedom at k = {k0}", data.nrows()));
    }
    let model = kmeans_fit(data.values().view(), k0, config.kmeans, &mut stream(base, &[11]))?;
    let sigma = pooled_noise_covariance(data, &model.labels, k0)?;
    let eig = symmetric_eig(&sigma)?;
    let q = haar_orthogonal(data.ncols(), &mut stream(base, &[12]));
    let transformed = match whiten_transform(data, &eig, &q, config.eigen_floor) {
        Ok(t) => t,
        Err(Error::DegenerateCovariance(why)) => return fallback(first_stage, Some(sigma), why),
        Err(e) => return Err(e),
    };
    let mut report = gabriel_select_k(&transformed, k_grid, config, &mut stream(base, &[13]))?;
    report.method = "gabriel-corrected".into();
    report.corrected = true;
    Ok(CorrectedOutcome { first_stage, report, sigma_hat: Some(sigma) })
}
