//! Covariance estimation, symmetric eigendecomposition, Haar-random
//! rotations and the whitening transform used by the correlation correction.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::DataMatrix;

/// Symmetry tolerance accepted by [`symmetric_eig`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Default relative eigenvalue floor for [`whiten_transform`].
pub const DEFAULT_EIGEN_FLOOR: f64 = 1e-12;

/// Eigendecomposition of a symmetric matrix with eigenvalues in
/// non-increasing order and orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricEig {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<f64>,
}

impl SymmetricEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn identity(p: usize) -> Self {
        Self { eigenvalues: Array1::ones(p), eigenvectors: Array2::eye(p) }
    }

    /// `V diag(λ) Vᵀ`
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.eigenvectors * &self.eigenvalues.view().insert_axis(Axis(0));
        scaled.dot(&self.eigenvectors.t())
    }
}

/// Mean of the selected rows, computed relative to the first selected row so
/// that a group of identical rows has exactly that row as its mean.
pub(crate) fn shifted_mean(points: ArrayView2<'_, f64>, rows: &[usize]) -> Array1<f64> {
    let pivot = points.row(rows[0]).to_owned();
    let mut acc = Array1::<f64>::zeros(points.ncols());
    for &i in &rows[1..] {
        acc.zip_mut_with(&points.row(i), |a, &x| *a += x);
        acc -= &pivot;
    }
    acc /= rows.len() as f64;
    acc + pivot
}

/// Pooled within-cluster covariance `Σ (xᵢ − μ̂ᵢ)(xᵢ − μ̂ᵢ)ᵀ / (N − k)`.
///
/// Labels are zero-based cluster ids below `k`.
pub fn pooled_noise_covariance(data: &DataMatrix, labels: &[usize], k: usize) -> Result<Array2<f64>> {
    data.require_complete("pooled_noise_covariance")?;
    let (n, p) = (data.nrows(), data.ncols());
    if labels.len() != n {
        return Err(invalid(format!("{} labels for {n} rows", labels.len())));
    }
    if n <= k {
        return Err(invalid(format!("need more rows than clusters (N = {n}, k = {k})")));
    }
    if let Some(&bad) = labels.iter().find(|&&g| g >= k) {
        return Err(invalid(format!("label {bad} out of range for k = {k}")));
    }
    let x = data.values();
    let mut members = vec![Vec::new(); k];
    for (i, &g) in labels.iter().enumerate() {
        members[g].push(i);
    }
    let mut residuals = x.clone();
    for rows in members.iter().filter(|r| !r.is_empty()) {
        let mean = shifted_mean(x.view(), rows);
        for &i in rows {
            let mut r = residuals.row_mut(i);
            r -= &mean;
        }
    }
    let mut cov = residuals.t().dot(&residuals) / (n - k) as f64;
    // force exact symmetry
    for a in 0..p {
        for b in a + 1..p {
            let v = 0.5 * (cov[[a, b]] + cov[[b, a]]);
            cov[[a, b]] = v;
            cov[[b, a]] = v;
        }
    }
    Ok(cov)
}

fn to_nalgebra(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

fn from_nalgebra(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

pub fn symmetric_eig(m: &Array2<f64>) -> Result<SymmetricEig> {
    let (r, c) = m.dim();
    if r != c || r == 0 {
        return Err(invalid(format!("expected a non-empty square matrix, got {r}x{c}")));
    }
    for i in 0..r {
        for j in i + 1..r {
            if (m[[i, j]] - m[[j, i]]).abs() > SYMMETRY_TOL {
                return Err(invalid(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    let eig = to_nalgebra(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let vectors = from_nalgebra(&eig.eigenvectors);
    Ok(SymmetricEig {
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        eigenvectors: vectors.select(Axis(1), &order),
    })
}

/// Haar-distributed orthogonal matrix: QR of an i.i.d. Gaussian matrix with
/// the signs of `R`'s diagonal folded into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Array2<f64> {
    assert!(p >= 1, "dimension must be positive");
    let g = DMatrix::<f64>::from_fn(p, p, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    from_nalgebra(&q)
}

/// `X Γ Λ̃^{-1/2} Q`, where `Λ̃` raises eigenvalues below `eps · λ_max` to
/// that floor.
pub fn whiten_transform(
    data: &DataMatrix,
    eig: &SymmetricEig,
    q: &Array2<f64>,
    eps: f64,
) -> Result<DataMatrix> {
    data.require_complete("whiten_transform")?;
    let p = data.ncols();
    if eig.dim() != p || q.dim() != (p, p) {
        return Err(invalid(format!(
            "dimension mismatch: data has {p} columns, eigendecomposition {}, rotation {:?}",
            eig.dim(),
            q.dim()
        )));
    }
    let top = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) {
        return Err(Error::DegenerateCovariance("no positive eigenvalue".into()));
    }
    let floor = eps * top;
    let inv_sqrt: Array1<f64> = eig.eigenvalues.mapv(|l| 1.0 / l.max(floor).sqrt());
    let scaled = &eig.eigenvectors * &inv_sqrt.view().insert_axis(Axis(0));
    let transform = scaled.dot(q);
    let mut out = DataMatrix::new(data.values().dot(&transform))?;
    if let Some(ids) = data.row_ids() {
        out = out.with_row_ids(ids.to_vec())?;
    }
    Ok(out)
}
