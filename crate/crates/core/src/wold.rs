//! Speckled-holdout cross-validation: each fold hides a random scattering
//! of matrix entries, clusters the rest with missing-data k-means, and
//! scores the hidden entries against the center coordinates of each row's
//! cluster.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kmeans::{kmeans_fit_missing, KMeansParams};
use crate::matrix::DataMatrix;
use crate::report::{CvReport, FoldId};
use crate::rng::{derive_seed, fork, stream};

const MAX_PLAN_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WoldConfig {
    pub folds: usize,
    pub holdout_fraction: f64,
    pub kmeans: KMeansParams,
}

impl Default for WoldConfig {
    fn default() -> Self {
        Self { folds: 10, holdout_fraction: 0.1, kmeans: KMeansParams::default() }
    }
}

/// Disjoint sets of held-out `(row, col)` entries, one per fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeckledPlan {
    n_rows: usize,
    n_cols: usize,
    holdout_fraction: f64,
    holdout_sets: Vec<Vec<(usize, usize)>>,
}

impl SpeckledPlan {
    /// Draw `folds` disjoint holdout sets, each about `holdout_fraction` of
    /// all entries. When `folds · holdout_fraction = 1` the sets partition
    /// the grid. Draws in which some fold hides a whole row or column are
    /// rejected and redrawn.
    pub fn random<R: Rng + ?Sized>(
        n_rows: usize,
        n_cols: usize,
        folds: usize,
        holdout_fraction: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if folds < 2 {
            return Err(invalid(format!("need at least 2 folds, got {folds}")));
        }
        if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
            return Err(invalid(format!("holdout fraction must lie in (0, 1), got {holdout_fraction}")));
        }
        let coverage = folds as f64 * holdout_fraction;
        if coverage > 1.0 + 1e-9 {
            return Err(invalid(format!(
                "{folds} disjoint folds of fraction {holdout_fraction} exceed the entry grid"
            )));
        }
        if n_rows < 2 || n_cols < 2 {
            return Err(invalid(format!("speckled holdout needs at least a 2x2 matrix, got {n_rows}x{n_cols}")));
        }
        let total = n_rows * n_cols;
        let partition = (coverage - 1.0).abs() <= 1e-9;
        let per_fold = (holdout_fraction * total as f64).round() as usize;
        if per_fold == 0 {
            return Err(invalid(format!("holdout fraction {holdout_fraction} hides no entry of a {n_rows}x{n_cols} matrix")));
        }
        let mut entries: Vec<(usize, usize)> = (0..n_rows).flat_map(|i| (0..n_cols).map(move |j| (i, j))).collect();
        for _ in 0..MAX_PLAN_ATTEMPTS {
            entries.shuffle(rng);
            let mut sets = vec![Vec::new(); folds];
            if partition {
                for (pos, &e) in entries.iter().enumerate() {
                    sets[pos % folds].push(e);
                }
            } else {
                for (f, chunk) in entries.chunks(per_fold).take(folds).enumerate() {
                    sets[f].extend_from_slice(chunk);
                }
            }
            if sets.iter().all(|s| !hides_whole_line(n_rows, n_cols, s)) {
                for s in &mut sets {
                    s.sort_unstable();
                }
                return Ok(Self { n_rows, n_cols, holdout_fraction, holdout_sets: sets });
            }
        }
        Err(Error::Infeasible(format!(
            "no speckled plan without a fully hidden row or column after {MAX_PLAN_ATTEMPTS} draws"
        )))
    }

    pub fn from_sets(n_rows: usize, n_cols: usize, holdout_sets: Vec<Vec<(usize, usize)>>) -> Result<Self> {
        if holdout_sets.is_empty() {
            return Err(invalid("plan has no folds"));
        }
        let mut seen = vec![false; n_rows * n_cols];
        for set in &holdout_sets {
            for &(i, j) in set {
                if i >= n_rows || j >= n_cols {
                    return Err(invalid(format!("entry ({i}, {j}) outside {n_rows}x{n_cols}")));
                }
                if std::mem::replace(&mut seen[i * n_cols + j], true) {
                    return Err(invalid(format!("entry ({i}, {j}) held out twice")));
                }
            }
            if hides_whole_line(n_rows, n_cols, set) {
                return Err(invalid("a fold hides a whole row or column"));
            }
        }
        let sizes: usize = holdout_sets.iter().map(Vec::len).sum();
        let holdout_fraction = sizes as f64 / (holdout_sets.len() * n_rows * n_cols) as f64;
        Ok(Self { n_rows, n_cols, holdout_fraction, holdout_sets })
    }

    pub fn holdout_sets(&self) -> &[Vec<(usize, usize)>] {
        &self.holdout_sets
    }

    pub fn holdout_fraction(&self) -> f64 {
        self.holdout_fraction
    }

    pub fn n_folds(&self) -> usize {
        self.holdout_sets.len()
    }
}

fn hides_whole_line(n_rows: usize, n_cols: usize, set: &[(usize, usize)]) -> bool {
    let mut per_row = vec![0usize; n_rows];
    let mut per_col = vec![0usize; n_cols];
    for &(i, j) in set {
        per_row[i] += 1;
        per_col[j] += 1;
    }
    per_row.contains(&n_cols) || per_col.contains(&n_rows)
}

/// Mean squared error over the held-out entries of one fold. Entries that
/// are missing in `data` itself are neither trained on nor scored.
pub fn wold_fold_error<R: Rng + ?Sized>(
    data: &DataMatrix,
    holdout: &[(usize, usize)],
    k: usize,
    params: KMeansParams,
    rng: &mut R,
) -> Result<f64> {
    let mut train = data.observed();
    for &(i, j) in holdout {
        train[[i, j]] = false;
    }
    let train_data = DataMatrix::with_mask(data.values().clone(), train)?;
    let model = kmeans_fit_missing(&train_data, k, params, rng)?;
    let (mut total, mut count) = (0.0, 0usize);
    for &(i, j) in holdout {
        if data.is_observed(i, j) {
            let d = data.values()[[i, j]] - model.centers[[model.labels[i], j]];
            total += d * d;
            count += 1;
        }
    }
    if count == 0 {
        return Err(invalid("fold holds out no observed entry"));
    }
    Ok(total / count as f64)
}

fn check_plan(data: &DataMatrix, plan: &SpeckledPlan) -> Result<()> {
    if (data.nrows(), data.ncols()) != (plan.n_rows, plan.n_cols) {
        return Err(invalid("speckled plan does not match data shape"));
    }
    Ok(())
}

/// Fold-averaged speckled error for a single `k`.
pub fn wold_cv_error<R: Rng + ?Sized>(
    data: &DataMatrix,
    plan: &SpeckledPlan,
    k: usize,
    params: KMeansParams,
    rng: &mut R,
) -> Result<f64> {
    let report = wold_cross_validate(data, plan, &[k], params, fork(rng))?;
    Ok(report.mean_error[0])
}

/// Speckled errors for every `k` and fold. Each `(fold, k)` cell has its own
/// stream derived from `seed`.
pub fn wold_cross_validate(
    data: &DataMatrix,
    plan: &SpeckledPlan,
    k_grid: &[usize],
    params: KMeansParams,
    seed: u64,
) -> Result<CvReport> {
    check_plan(data, plan)?;
    let mut grid = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    match (grid.first(), grid.last()) {
        (None, _) => return Err(invalid("k grid is empty")),
        (Some(0), _) => return Err(invalid("k must be at least 1")),
        (_, Some(&k)) if k > data.nrows() => {
            return Err(invalid(format!("k = {k} exceeds {} rows", data.nrows())));
        }
        _ => {}
    }
    let n_folds = plan.n_folds();
    let cells: Vec<(usize, usize)> = (0..grid.len()).flat_map(|ki| (0..n_folds).map(move |f| (ki, f))).collect();
    let flat: Vec<f64> = cells
        .par_iter()
        .map(|&(ki, f)| {
            let k = grid[ki];
            let mut rng = stream(seed, &[f as u64, k as u64]);
            wold_fold_error(data, &plan.holdout_sets[f], k, params, &mut rng)
        })
        .collect::<Result<_>>()?;
    let errors = flat.chunks(n_folds).map(<[f64]>::to_vec).collect();
    let folds = (0..n_folds).map(|r| FoldId { r, s: 0 }).collect();
    CvReport::new("wold", grid, folds, errors)
}

/// Choose `k` with a given plan.
pub fn wold_select_k<R: Rng + ?Sized>(
    data: &DataMatrix,
    k_grid: &[usize],
    plan: &SpeckledPlan,
    params: KMeansParams,
    rng: &mut R,
) -> Result<CvReport> {
    wold_cross_validate(data, plan, k_grid, params, fork(rng))
}

/// Draw a plan from `config` and choose `k`.
pub fn wold_select_k_auto<R: Rng + ?Sized>(
    data: &DataMatrix,
    k_grid: &[usize],
    config: &WoldConfig,
    rng: &mut R,
) -> Result<CvReport> {
    let base = fork(rng);
    let plan = SpeckledPlan::random(
        data.nrows(),
        data.ncols(),
        config.folds,
        config.holdout_fraction,
        &mut stream(base, &[0]),
    )?;
    wold_cross_validate(data, &plan, k_grid, config.kmeans, derive_seed(base, &[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    #[test]
    fn default_plan_partitions_grid() {
        let plan = SpeckledPlan::random(100, 10, 10, 0.1, &mut seeded(3)).unwrap();
        let mut all: Vec<(usize, usize)> = plan.holdout_sets().concat();
        assert!(plan.holdout_sets().iter().all(|s| s.len() == 100));
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 1000);
    }

    #[test]
    fn partial_coverage_sizes() {
        let plan = SpeckledPlan::random(30, 7, 3, 0.2, &mut seeded(1)).unwrap();
        assert!(plan.holdout_sets().iter().all(|s| s.len() == 42));
    }

    #[test]
    fn infeasible_requests_rejected() {
        assert!(SpeckledPlan::random(10, 10, 1, 0.1, &mut seeded(0)).is_err());
        assert!(SpeckledPlan::random(10, 10, 5, 0.3, &mut seeded(0)).is_err());
        assert!(SpeckledPlan::random(10, 1, 2, 0.5, &mut seeded(0)).is_err());
        assert!(SpeckledPlan::random(2, 2, 2, 0.01, &mut seeded(0)).is_err());
        // the two diagonals of a 2x2 grid are a valid split
        assert!(SpeckledPlan::random(2, 2, 2, 0.5, &mut seeded(0)).is_ok());
    }

    #[test]
    fn from_sets_validates() {
        assert!(SpeckledPlan::from_sets(2, 2, vec![vec![(0, 0), (1, 1)], vec![(0, 1), (1, 0)]]).is_ok());
        assert!(SpeckledPlan::from_sets(2, 2, vec![vec![(0, 0), (0, 1)]]).is_err());
        assert!(SpeckledPlan::from_sets(2, 2, vec![vec![(0, 0)], vec![(0, 0)]]).is_err());
    }

    #[test]
    fn single_cluster_scores_against_training_column_means() {
        let data = DataMatrix::new(array![[1., 10.], [3., 20.], [8., 30.]]).unwrap();
        let plan = SpeckledPlan::from_sets(3, 2, vec![vec![(0, 0), (2, 1)]]).unwrap();
        let report = wold_cross_validate(&data, &plan, &[1], KMeansParams::default(), 0).unwrap();
        // column means without held-out entries: 5.5 and 15
        let want = ((1.0f64 - 5.5).powi(2) + (30.0f64 - 15.0).powi(2)) / 2.0;
        assert_eq!(report.mean_error[0], want);
    }

    #[test]
    fn duplicated_centers_give_zero_error() {
        let centers = [[0.0, 0.0, 0.0], [10.0, -4.0, 6.0]];
        let data = DataMatrix::new(Array2::from_shape_fn((20, 3), |(i, j)| centers[i % 2][j])).unwrap();
        let plan = SpeckledPlan::random(20, 3, 10, 0.1, &mut seeded(2)).unwrap();
        let report = wold_select_k(&data, &[1, 2, 3], &plan, KMeansParams::default(), &mut seeded(0)).unwrap();
        assert_eq!(report.mean_error_for(2), Some(0.0));
        assert_eq!(report.selected_k, 2);
    }

    #[test]
    fn constant_matrix_selects_one() {
        let data = DataMatrix::new(Array2::from_elem((15, 4), 3.0)).unwrap();
        let report = wold_select_k_auto(&data, &[1, 2, 3], &WoldConfig::default(), &mut seeded(0)).unwrap();
        assert!(report.mean_error.iter().all(|&e| e == 0.0));
        assert_eq!(report.selected_k, 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn plans_never_hide_a_whole_line(n in 2usize..25, p in 2usize..8, seed: u64) {
            let plan = SpeckledPlan::random(n, p, 10, 0.1, &mut seeded(seed));
            if let Ok(plan) = plan {
                for s in plan.holdout_sets() {
                    prop_assert!(!hides_whole_line(n, p, s));
                }
            }
        }

        #[test]
        fn column_permutation_invariance(seed: u64, vals in proptest::collection::vec(-6i32..6, 48)) {
            let data = Array2::from_shape_vec((12, 4), vals.iter().map(|&v| v as f64).collect()).unwrap();
            let perm = [2usize, 0, 3, 1];
            let permuted = Array2::from_shape_fn((12, 4), |(i, j)| data[[i, perm[j]]]);
            let plan = SpeckledPlan::random(12, 4, 4, 0.25, &mut seeded(seed)).unwrap();
            // entry (i, perm[j]) of the original sits at (i, j) after permuting
            let mut inv = [0usize; 4];
            for (j, &pj) in perm.iter().enumerate() { inv[pj] = j; }
            let sets = plan.holdout_sets().iter()
                .map(|s| s.iter().map(|&(i, j)| (i, inv[j])).collect())
                .collect();
            let plan_p = SpeckledPlan::from_sets(12, 4, sets).unwrap();
            let a = wold_cross_validate(&DataMatrix::new(data).unwrap(), &plan, &[1, 2, 3], KMeansParams::default(), seed).unwrap();
            let b = wold_cross_validate(&DataMatrix::new(permuted).unwrap(), &plan_p, &[1, 2, 3], KMeansParams::default(), seed).unwrap();
            for (x, y) in a.mean_error.iter().zip(&b.mean_error) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{} vs {}", x, y);
            }
        }
    }
}
