//! Single 2x2-fold experiments whose outcomes have closed-form predictions.

use clustcv::gabriel::{cross_validate_plan, FoldPlan};
use clustcv::kmeans::KMeansParams;
use clustcv::rng::{derive_seed, stream};
use clustcv::simgen::{correlated_pair, symmetric_pair_mixture};
use clustcv::theory::{distance_to_two_cluster_boundary, single_cluster_2d_prefers_one, two_cluster_prefers_two};
use clustcv::{DataMatrix, FoldId, Result};
use rayon::prelude::*;
use serde::Serialize;

/// Selected `k` from one fold that holds out half the rows and predicts
/// column 1 from column 0.
pub fn single_fold_select(data: &DataMatrix, k_grid: &[usize], params: KMeansParams, seed: u64) -> Result<usize> {
    let plan = FoldPlan::with_columns(data.nrows(), 2, vec![vec![0], vec![1]], &mut stream(seed, &[0]))?;
    let report = cross_validate_plan(data, &plan, &[FoldId { r: 0, s: 1 }], k_grid, params, derive_seed(seed, &[1]))?;
    Ok(report.selected_k)
}

/// One replicate of the correlated single-cluster experiment.
pub fn single_cluster_replicate(rho: f64, n: usize, k_max: usize, params: KMeansParams, seed: u64) -> Result<usize> {
    let data = correlated_pair(n, rho, &mut stream(seed, &[2]))?;
    single_fold_select(&data, &(1..=k_max).collect::<Vec<_>>(), params, seed)
}

/// One replicate of the two-cluster experiment, choosing between 1 and 2.
pub fn two_cluster_replicate(mu_x: f64, mu_y: f64, n: usize, params: KMeansParams, seed: u64) -> Result<usize> {
    let (data, _) = symmetric_pair_mixture(n, mu_x, mu_y, &mut stream(seed, &[2]))?;
    single_fold_select(&data, &[1, 2], params, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub experiment: &'static str,
    pub rho: Option<f64>,
    pub mu_x: Option<f64>,
    pub mu_y: Option<f64>,
    pub boundary_distance: Option<f64>,
    /// `"1"` or `"2+"` (single cluster), `"1"` or `"2"` (two clusters).
    pub expected: &'static str,
    pub selections: Vec<usize>,
    pub agree: usize,
    pub total: usize,
}

impl VerifyRow {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.agree as f64 / self.total as f64
        }
    }
}

pub fn single_cluster_row(rho: f64, n: usize, reps: usize, k_max: usize, params: KMeansParams, seed: u64) -> Result<VerifyRow> {
    let prefers_one = single_cluster_2d_prefers_one(rho);
    let selections: Vec<usize> = (0..reps as u64)
        .into_par_iter()
        .map(|r| single_cluster_replicate(rho, n, k_max, params, derive_seed(seed, &[1, rho.to_bits(), r])))
        .collect::<Result<_>>()?;
    let agree = selections.iter().filter(|&&k| (k == 1) == prefers_one).count();
    Ok(VerifyRow {
        experiment: "single_cluster",
        rho: Some(rho),
        mu_x: None,
        mu_y: None,
        boundary_distance: None,
        expected: if prefers_one { "1" } else { "2+" },
        selections,
        agree,
        total: reps,
    })
}

pub fn two_cluster_row(mu_x: f64, mu_y: f64, n: usize, reps: usize, params: KMeansParams, seed: u64) -> Result<VerifyRow> {
    let prefers_two = two_cluster_prefers_two(mu_x, mu_y);
    let selections: Vec<usize> = (0..reps as u64)
        .into_par_iter()
        .map(|r| two_cluster_replicate(mu_x, mu_y, n, params, derive_seed(seed, &[2, mu_x.to_bits(), mu_y.to_bits(), r])))
        .collect::<Result<_>>()?;
    let agree = selections.iter().filter(|&&k| (k == 2) == prefers_two).count();
    Ok(VerifyRow {
        experiment: "two_cluster",
        rho: None,
        mu_x: Some(mu_x),
        mu_y: Some(mu_y),
        boundary_distance: Some(distance_to_two_cluster_boundary(mu_x, mu_y)),
        expected: if prefers_two { "2" } else { "1" },
        selections,
        agree,
        total: reps,
    })
}

/// Points `(i·step, j·step)` covering `[0, 3]²`, at least `min_distance`
/// from the boundary curve.
pub fn two_cluster_grid(step: f64, min_distance: f64) -> Vec<(f64, f64)> {
    let count = (3.0 / step + 1e-9).floor() as usize;
    let mut out = Vec::new();
    for i in 0..=count {
        for j in 0..=count {
            let (x, y) = (i as f64 * step, j as f64 * step);
            if distance_to_two_cluster_boundary(x, y) >= min_distance {
                out.push((x, y));
            }
        }
    }
    out
}
