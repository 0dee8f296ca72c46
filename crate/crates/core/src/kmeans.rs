//! Lloyd's k-means with k-means++ seeding and restarts, a missing-data
//! variant, and the within-cluster dispersion curve.
//!
//! Both variants run through the same engine. With a mask, the distance from
//! row `i` to a center only uses the observed coordinates and is scaled by
//! `P / |observed(i)|`; center coordinates average the observed entries and
//! fall back to the global column mean when a cluster has none. A fully
//! observed mask therefore reproduces the complete-data computation exactly.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::DataMatrix;
use crate::rng::{fork, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { restarts: 10, max_iter: 300 }
    }
}

/// Fitted clustering. Labels are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub centers: Array2<f64>,
    pub labels: Vec<usize>,
    pub dispersion: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    centers: Vec<Vec<f64>>,
    labels: Vec<usize>,
    dispersion: f64,
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centers.nrows()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &g in &self.labels {
            sizes[g] += 1;
        }
        sizes
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(&ModelJson {
            centers: self.centers.outer_iter().map(|r| r.to_vec()).collect(),
            labels: self.labels.clone(),
            dispersion: self.dispersion,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: ModelJson = serde_json::from_str(s)?;
        let k = m.centers.len();
        let d = m.centers.first().map_or(0, Vec::len);
        let flat: Vec<f64> = m.centers.into_iter().flatten().collect();
        let centers = Array2::from_shape_vec((k, d), flat).map_err(|e| invalid(e.to_string()))?;
        Ok(Self { centers, labels: m.labels, dispersion: m.dispersion })
    }
}

/// Row-major problem data shared by the complete and masked fits.
struct Problem {
    n: usize,
    p: usize,
    x: Vec<f64>,
    observed: Option<Vec<bool>>,
    /// `P / |observed(i)|` per row; all ones without a mask.
    scale: Vec<f64>,
    col_means: Vec<f64>,
}

impl Problem {
    fn complete(points: ArrayView2<'_, f64>) -> Self {
        let (n, p) = points.dim();
        let x: Vec<f64> = points.iter().copied().collect();
        let col_means = (0..p)
            .map(|j| (0..n).map(|i| x[i * p + j]).sum::<f64>() / n as f64)
            .collect();
        Self { n, p, x, observed: None, scale: vec![1.0; n], col_means }
    }

    fn masked(data: &DataMatrix) -> Result<Self> {
        let (n, p) = (data.nrows(), data.ncols());
        let x: Vec<f64> = data.values().iter().copied().collect();
        let obs: Vec<bool> = data.observed().iter().copied().collect();
        let mut scale = Vec::with_capacity(n);
        for i in 0..n {
            let count = obs[i * p..(i + 1) * p].iter().filter(|&&o| o).count();
            if count == 0 {
                return Err(invalid(format!("row {i} has no observed entries")));
            }
            scale.push(p as f64 / count as f64);
        }
        let mut col_means = Vec::with_capacity(p);
        for j in 0..p {
            let (sum, count) = (0..n)
                .filter(|&i| obs[i * p + j])
                .fold((0.0, 0usize), |(s, c), i| (s + x[i * p + j], c + 1));
            if count == 0 {
                return Err(invalid(format!("column {j} has no observed entries")));
            }
            col_means.push(sum / count as f64);
        }
        Ok(Self { n, p, x, observed: Some(obs), scale, col_means })
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    fn is_obs(&self, i: usize, j: usize) -> bool {
        self.observed.as_ref().is_none_or(|o| o[i * self.p + j])
    }

    #[inline]
    fn dist(&self, i: usize, center: &[f64]) -> f64 {
        let row = self.row(i);
        let ss = match &self.observed {
            None => row.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            Some(o) => {
                let obs = &o[i * self.p..(i + 1) * self.p];
                row.iter()
                    .zip(center)
                    .zip(obs)
                    .filter(|(_, &m)| m)
                    .map(|((a, b), _)| (a - b) * (a - b))
                    .sum::<f64>()
            }
        };
        self.scale[i] * ss
    }

    /// A data row used as a center, missing coordinates filled by column means.
    fn row_as_center(&self, i: usize) -> Vec<f64> {
        (0..self.p)
            .map(|j| if self.is_obs(i, j) { self.x[i * self.p + j] } else { self.col_means[j] })
            .collect()
    }

    /// Per-cluster, per-coordinate means of observed entries, pivoted on the
    /// first observed entry so identical values average exactly.
    fn centers_from_labels(&self, labels: &[usize], k: usize) -> Vec<f64> {
        let p = self.p;
        let mut pivot = vec![f64::NAN; k * p];
        let mut acc = vec![0.0; k * p];
        let mut count = vec![0usize; k * p];
        for (i, &g) in labels.iter().enumerate() {
            for j in 0..p {
                if !self.is_obs(i, j) {
                    continue;
                }
                let c = g * p + j;
                let v = self.x[i * p + j];
                if count[c] == 0 {
                    pivot[c] = v;
                } else {
                    acc[c] = acc[c] + v - pivot[c];
                }
                count[c] += 1;
            }
        }
        (0..k * p)
            .map(|c| {
                if count[c] == 0 {
                    self.col_means[c % p]
                } else {
                    acc[c] / count[c] as f64 + pivot[c]
                }
            })
            .collect()
    }

    /// Nearest center; on exact ties keep `current` if it is tied, otherwise
    /// take the lowest index.
    fn nearest(&self, i: usize, centers: &[f64], k: usize, current: Option<usize>) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for g in 0..k {
            let d = self.dist(i, &centers[g * self.p..(g + 1) * self.p]);
            if d < best_d || (d == best_d && current == Some(g)) {
                best = g;
                best_d = d;
            }
        }
        best
    }

    fn assign(&self, centers: &[f64], k: usize, previous: Option<&[usize]>) -> Vec<usize> {
        (0..self.n)
            .map(|i| self.nearest(i, centers, k, previous.map(|l| l[i])))
            .collect()
    }

    fn dispersion(&self, centers: &[f64], labels: &[usize]) -> f64 {
        labels
            .iter()
            .enumerate()
            .map(|(i, &g)| self.dist(i, &centers[g * self.p..(g + 1) * self.p]))
            .sum()
    }

    fn seed_plus_plus<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<f64> {
        let p = self.p;
        let mut centers = Vec::with_capacity(k * p);
        centers.extend(self.row_as_center(rng.random_range(0..self.n)));
        let mut d2: Vec<f64> = (0..self.n).map(|i| self.dist(i, &centers[..p])).collect();
        for _ in 1..k {
            let total: f64 = d2.iter().sum();
            let pick = if total > 0.0 {
                let mut target = rng.random::<f64>() * total;
                let mut chosen = None;
                for (i, &w) in d2.iter().enumerate() {
                    if w > 0.0 {
                        chosen = Some(i);
                        if target < w {
                            break;
                        }
                        target -= w;
                    }
                }
                chosen.expect("positive total weight")
            } else {
                rng.random_range(0..self.n)
            };
            let c = self.row_as_center(pick);
            for (i, d) in d2.iter_mut().enumerate() {
                *d = d.min(self.dist(i, &c));
            }
            centers.extend(c);
        }
        centers
    }

    /// Move points into empty clusters: the point farthest from its center,
    /// among clusters with at least two members, becomes the new center.
    fn repair_empty(&self, centers: &mut [f64], labels: &mut [usize], k: usize) -> bool {
        let p = self.p;
        let mut changed = false;
        loop {
            let mut sizes = vec![0usize; k];
            for &g in labels.iter() {
                sizes[g] += 1;
            }
            let Some(empty) = sizes.iter().position(|&s| s == 0) else {
                return changed;
            };
            let donor = (0..self.n)
                .filter(|&i| sizes[labels[i]] >= 2)
                .map(|i| (i, self.dist(i, &centers[labels[i] * p..(labels[i] + 1) * p])))
                .fold(None::<(usize, f64)>, |best, (i, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                })
                .map(|(i, _)| i)
                .expect("n >= k guarantees a cluster with two members");
            let c = self.row_as_center(donor);
            centers[empty * p..(empty + 1) * p].copy_from_slice(&c);
            labels[donor] = empty;
            changed = true;
        }
    }

    fn lloyd<R: Rng + ?Sized>(&self, k: usize, max_iter: usize, rng: &mut R) -> (Vec<f64>, Vec<usize>) {
        let mut centers = self.seed_plus_plus(k, rng);
        let mut labels = self.assign(&centers, k, None);
        let mut converged = false;
        for _ in 0..max_iter {
            self.repair_empty(&mut centers, &mut labels, k);
            centers = self.centers_from_labels(&labels, k);
            let next = self.assign(&centers, k, Some(&labels));
            if next == labels {
                converged = true;
                break;
            }
            labels = next;
        }
        if !converged {
            // Out of iterations: make labels consistent with fixed centers.
            for _ in 0..=k {
                if !self.repair_empty(&mut centers, &mut labels, k) {
                    let next = self.assign(&centers, k, Some(&labels));
                    if next == labels {
                        break;
                    }
                    labels = next;
                }
            }
        }
        (centers, labels)
    }

    fn fit<R: Rng + ?Sized>(&self, k: usize, params: KMeansParams, rng: &mut R) -> KMeansModel {
        let base = fork(rng);
        let mut best: Option<(Vec<f64>, Vec<usize>, f64)> = None;
        for r in 0..params.restarts.max(1) {
            let mut local = stream(base, &[r as u64]);
            let (centers, labels) = self.lloyd(k, params.max_iter, &mut local);
            let w = self.dispersion(&centers, &labels);
            if best.as_ref().is_none_or(|(_, _, bw)| w < *bw) {
                best = Some((centers, labels, w));
            }
        }
        let (centers, labels, dispersion) = best.expect("at least one restart");
        KMeansModel {
            centers: Array2::from_shape_vec((k, self.p), centers).expect("k x p centers"),
            labels,
            dispersion,
        }
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if n < k {
        return Err(invalid(format!("cannot form {k} clusters from {n} points")));
    }
    Ok(())
}

/// Best of `params.restarts` Lloyd runs by dispersion (ties go to the
/// earliest restart).
pub fn kmeans_fit<R: Rng + ?Sized>(
    points: ArrayView2<'_, f64>,
    k: usize,
    params: KMeansParams,
    rng: &mut R,
) -> Result<KMeansModel> {
    check_k(points.nrows(), k)?;
    if points.ncols() == 0 {
        return Err(invalid("points have no coordinates"));
    }
    Ok(Problem::complete(points).fit(k, params, rng))
}

/// k-means on partially observed rows. Dispersion is the sum of scaled
/// observed-coordinate distances.
pub fn kmeans_fit_missing<R: Rng + ?Sized>(
    data: &DataMatrix,
    k: usize,
    params: KMeansParams,
    rng: &mut R,
) -> Result<KMeansModel> {
    check_k(data.nrows(), k)?;
    Ok(Problem::masked(data)?.fit(k, params, rng))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionCurve {
    /// `(k, W_k)` for `k = 1..=k_max`.
    pub points: Vec<(usize, f64)>,
    /// Set when some `W_{k+1} > W_k`; restarts are heuristic so this can happen.
    pub non_monotone: bool,
}

pub fn dispersion_curve<R: Rng + ?Sized>(
    points: ArrayView2<'_, f64>,
    k_max: usize,
    params: KMeansParams,
    rng: &mut R,
) -> Result<DispersionCurve> {
    if k_max > points.nrows() {
        return Err(invalid(format!("k_max = {k_max} exceeds {} points", points.nrows())));
    }
    let base = fork(rng);
    let problem = Problem::complete(points);
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let model = problem.fit(k, params, &mut stream(base, &[k as u64]));
        out.push((k, model.dispersion));
    }
    let non_monotone = out.windows(2).any(|w| w[1].1 > w[0].1);
    Ok(DispersionCurve { points: out, non_monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn toy_1d() -> Array2<f64> {
        array![[0.0], [0.1], [0.2], [10.0], [10.1], [10.2]]
    }

    fn check_invariants(x: ArrayView2<'_, f64>, m: &KMeansModel) {
        let sizes = m.cluster_sizes();
        assert!(sizes.iter().all(|&s| s > 0), "empty cluster: {sizes:?}");
        let mut total = 0.0;
        for (i, &g) in m.labels.iter().enumerate() {
            let d = |c: usize| (&x.row(i) - &m.centers.row(c)).mapv(|v| v * v).sum();
            let own = d(g);
            for c in 0..m.k() {
                assert!(own <= d(c), "row {i} closer to {c} than its center {g}");
            }
            total += own;
        }
        assert!((total - m.dispersion).abs() <= 1e-8 * total.max(1.0));
    }

    #[test]
    fn single_cluster_is_column_mean() {
        let x = array![[1.0, 2.0], [3.0, 6.0], [5.0, 1.0]];
        let m = kmeans_fit(x.view(), 1, KMeansParams::default(), &mut seeded(1)).unwrap();
        assert_abs_diff_eq!(m.centers.row(0), array![3.0, 3.0], epsilon = 1e-12);
        // total SS: (4+0+4) + (1+9+4)
        assert_abs_diff_eq!(m.dispersion, 22.0, epsilon = 1e-12);
    }

    #[test]
    fn duplicated_values_recovered_exactly() {
        let vals = [[0.3, -1.7], [2.1, 0.9], [-4.4, 3.3], [1.1, 1.1]];
        let rows: Vec<[f64; 2]> = (0..5).flat_map(|_| vals).collect();
        let x = Array2::from_shape_fn((rows.len(), 2), |(i, j)| rows[i][j]);
        for seed in 0..10 {
            let m = kmeans_fit(x.view(), 4, KMeansParams::default(), &mut seeded(seed)).unwrap();
            assert_eq!(m.dispersion, 0.0);
            for v in vals {
                assert!(m.centers.outer_iter().any(|c| c[0] == v[0] && c[1] == v[1]));
            }
            check_invariants(x.view(), &m);
        }
    }

    #[test]
    fn more_clusters_than_distinct_values_has_no_empty_cluster() {
        let x = array![[1.0], [1.0], [1.0], [2.0], [2.0]];
        let m = kmeans_fit(x.view(), 4, KMeansParams::default(), &mut seeded(5)).unwrap();
        assert_eq!(m.dispersion, 0.0);
        check_invariants(x.view(), &m);
    }

    #[test]
    fn two_well_separated_groups() {
        let x = toy_1d();
        let m = kmeans_fit(x.view(), 2, KMeansParams::default(), &mut seeded(2)).unwrap();
        let mut c: Vec<f64> = m.centers.iter().copied().collect();
        c.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(c[0], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 10.1, epsilon = 1e-12);
        assert_abs_diff_eq!(m.dispersion, 0.04, epsilon = 1e-12);
    }

    #[test]
    fn errors_on_bad_k() {
        let x = toy_1d();
        assert!(kmeans_fit(x.view(), 0, KMeansParams::default(), &mut seeded(0)).is_err());
        assert!(kmeans_fit(x.view(), 7, KMeansParams::default(), &mut seeded(0)).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let x = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64);
        let a = kmeans_fit(x.view(), 3, KMeansParams::default(), &mut seeded(9)).unwrap();
        let b = kmeans_fit(x.view(), 3, KMeansParams::default(), &mut seeded(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dispersion_curve_examples() {
        let x = toy_1d();
        let curve = dispersion_curve(x.view(), 6, KMeansParams::default(), &mut seeded(4)).unwrap();
        assert_abs_diff_eq!(curve.points[0].1, 150.04, epsilon = 1e-9);
        assert_abs_diff_eq!(curve.points[1].1, 0.04, epsilon = 1e-12);
        assert_eq!(curve.points[5], (6, 0.0));
        assert!(dispersion_curve(x.view(), 7, KMeansParams::default(), &mut seeded(4)).is_err());
    }

    #[test]
    fn missing_with_full_mask_matches_complete_fit() {
        let x = Array2::from_shape_fn((30, 4), |(i, j)| ((i * 13 + j * 5) % 17) as f64 * 0.37);
        let mask = Array2::from_elem(x.dim(), true);
        let d = DataMatrix::with_mask(x.clone(), mask).unwrap();
        for seed in 0..5 {
            let a = kmeans_fit(x.view(), 3, KMeansParams::default(), &mut seeded(seed)).unwrap();
            let b = kmeans_fit_missing(&d, 3, KMeansParams::default(), &mut seeded(seed)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn missing_single_row() {
        let d = DataMatrix::with_mask(array![[1.5, 9.0, -2.0]], array![[true, false, true]]).unwrap();
        let m = kmeans_fit_missing(&d, 1, KMeansParams::default(), &mut seeded(0));
        // the masked column has no observed entry at all
        assert!(m.is_err());

        let d = DataMatrix::new(array![[1.5, 9.0, -2.0]]).unwrap();
        let m = kmeans_fit_missing(&d, 1, KMeansParams::default(), &mut seeded(0)).unwrap();
        assert_eq!(m.centers.row(0), array![1.5, 9.0, -2.0]);
    }

    #[test]
    fn missing_rejects_fully_masked_row() {
        let d = DataMatrix::with_mask(array![[1.0, 2.0], [3.0, 4.0]], array![[false, false], [true, true]])
            .unwrap();
        assert!(kmeans_fit_missing(&d, 1, KMeansParams::default(), &mut seeded(0)).is_err());
    }

    #[test]
    fn missing_coordinate_falls_back_to_column_mean() {
        // cluster {row 2, row 3} never observes column 1
        let x = array![[0.0, 1.0], [0.0, 3.0], [100.0, 0.0], [100.0, 0.0]];
        let mask = array![[true, true], [true, true], [true, false], [true, false]];
        let d = DataMatrix::with_mask(x, mask).unwrap();
        let m = kmeans_fit_missing(&d, 2, KMeansParams::default(), &mut seeded(3)).unwrap();
        let far = m.labels[2];
        assert_eq!(m.labels[3], far);
        assert_abs_diff_eq!(m.centers[[far, 0]], 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.centers[[far, 1]], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn model_json_round_trip() {
        let m = kmeans_fit(toy_1d().view(), 2, KMeansParams::default(), &mut seeded(2)).unwrap();
        let back = KMeansModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
