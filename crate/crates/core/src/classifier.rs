//! Nearest-class-mean classifier: linear discriminant analysis with equal
//! priors and identity covariance.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::shifted_mean;

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidClassifier {
    class_means: Array2<f64>,
}

impl CentroidClassifier {
    /// Class means of `predictors` grouped by zero-based `labels` below `k`.
    pub fn fit(predictors: ArrayView2<'_, f64>, labels: &[usize], k: usize) -> Result<Self> {
        if labels.len() != predictors.nrows() {
            return Err(invalid(format!(
                "{} labels for {} predictor rows",
                labels.len(),
                predictors.nrows()
            )));
        }
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        let mut members = vec![Vec::new(); k];
        for (i, &g) in labels.iter().enumerate() {
            if g >= k {
                return Err(invalid(format!("label {g} out of range for k = {k}")));
            }
            members[g].push(i);
        }
        let mut class_means = Array2::zeros((k, predictors.ncols()));
        for (g, rows) in members.iter().enumerate() {
            if rows.is_empty() {
                return Err(Error::MissingClass(g));
            }
            class_means.row_mut(g).assign(&shifted_mean(predictors, rows));
        }
        Ok(Self { class_means })
    }

    pub fn from_means(class_means: Array2<f64>) -> Result<Self> {
        if class_means.nrows() == 0 || class_means.iter().any(|v| !v.is_finite()) {
            return Err(invalid("class means must be non-empty and finite"));
        }
        Ok(Self { class_means })
    }

    pub fn class_means(&self) -> &Array2<f64> {
        &self.class_means
    }

    pub fn k(&self) -> usize {
        self.class_means.nrows()
    }

    /// Class with the closest mean. Exact ties are broken uniformly at random;
    /// `rng` is only consumed when a tie occurs.
    pub fn predict<R: Rng + ?Sized>(&self, x: ArrayView1<'_, f64>, rng: &mut R) -> usize {
        assert_eq!(x.len(), self.class_means.ncols(), "predictor dimension mismatch");
        let mut best = f64::INFINITY;
        let mut tied: Vec<usize> = Vec::new();
        for (g, mean) in self.class_means.axis_iter(Axis(0)).enumerate() {
            let d: f64 = mean.iter().zip(x.iter()).map(|(m, v)| (m - v) * (m - v)).sum();
            if d < best {
                best = d;
                tied.clear();
                tied.push(g);
            } else if d == best {
                tied.push(g);
            }
        }
        match tied.len() {
            1 => tied[0],
            n => tied[rng.random_range(0..n)],
        }
    }
}
