//! Closed-form results about when Gabriel cross-validation prefers one
//! cluster or two under Gaussian noise, and the truncated-normal moments
//! they are built from.
//!
//! Comparisons that come out exactly tight report `false`, i.e. they favour
//! the smaller number of clusters.

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::linalg::symmetric_eig;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density; zero at ±∞.
pub fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        INV_SQRT_2PI * (-0.5 * x * x).exp()
    }
}

/// Standard normal distribution function via `erfc`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn std_normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// `P(a < Z < b)`, evaluated on the tail side that keeps precision.
fn interval_mass(a: f64, b: f64) -> Result<f64> {
    if a.is_nan() || b.is_nan() || !(a < b) {
        return Err(Error::InvalidInterval(format!("need a < b, got ({a}, {b})")));
    }
    let mass = if a >= 0.0 {
        std_normal_cdf(-a) - std_normal_cdf(-b)
    } else {
        std_normal_cdf(b) - std_normal_cdf(a)
    };
    if mass > 0.0 {
        Ok(mass)
    } else {
        Err(Error::InvalidInterval(format!("({a}, {b}) has no numerical probability mass")))
    }
}

/// `t φ(t)`, with the limit 0 at infinite `t`.
fn weighted_pdf(t: f64, weight: f64) -> f64 {
    if t.is_infinite() {
        0.0
    } else {
        weight * std_normal_pdf(t)
    }
}

/// `E(Z | a < Z < b)` for standard normal `Z`; either bound may be infinite.
pub fn truncated_normal_mean(a: f64, b: f64) -> Result<f64> {
    let mass = interval_mass(a, b)?;
    Ok(-(std_normal_pdf(b) - std_normal_pdf(a)) / mass)
}

/// `E{(Z − δ)² | a < Z < b}` for standard normal `Z`.
pub fn truncated_normal_sqdev(delta: f64, a: f64, b: f64) -> Result<f64> {
    let mass = interval_mass(a, b)?;
    let upper = weighted_pdf(b, b - 2.0 * delta);
    let lower = weighted_pdf(a, a - 2.0 * delta);
    Ok(delta * delta + 1.0 - (upper - lower) / mass)
}

/// Single mean-zero cluster in two dimensions with unit variances and
/// correlation `rho`: one cluster beats any `k > 1` iff `|rho| < 1/2`.
pub fn single_cluster_2d_prefers_one(rho: f64) -> bool {
    debug_assert!(rho.abs() <= 1.0, "correlation out of range: {rho}");
    rho.abs() < 0.5
}

/// Left side of the two-cluster separation inequality.
fn separation_lhs(mu_y: f64) -> f64 {
    2.0 * std_normal_pdf(mu_y) + mu_y + 2.0 * mu_y * std_normal_cdf(mu_y)
}

/// Equal mixture of `N(±(mu_x, mu_y), I)`: whether two clusters beat one,
/// `2φ(μY) + μY + 2μY Φ(μY) < 4μY Φ(μX)`.
pub fn two_cluster_prefers_two(mu_x: f64, mu_y: f64) -> bool {
    debug_assert!(mu_x >= 0.0 && mu_y >= 0.0);
    separation_lhs(mu_y) < 4.0 * mu_y * std_normal_cdf(mu_x)
}

/// The `mu_x` at which [`two_cluster_prefers_two`] switches for a given
/// `mu_y`, or `None` when no finite `mu_x` makes two clusters preferable.
pub fn two_cluster_boundary_mu_x(mu_y: f64) -> Option<f64> {
    if mu_y <= 0.0 {
        return None;
    }
    let target = separation_lhs(mu_y) / (4.0 * mu_y);
    (target < 1.0).then(|| std_normal_quantile(target))
}

/// Euclidean distance from `(mu_x, mu_y)` to the two-cluster boundary curve,
/// found by dense sampling of the curve over `mu_y` in `(0, 8]`.
pub fn distance_to_two_cluster_boundary(mu_x: f64, mu_y: f64) -> f64 {
    const STEPS: usize = 16_000;
    (1..=STEPS)
        .filter_map(|i| {
            let y = 8.0 * i as f64 / STEPS as f64;
            two_cluster_boundary_mu_x(y).map(|x| (x, y))
        })
        .filter(|(x, _)| x.is_finite())
        .map(|(x, y)| ((x - mu_x).powi(2) + (y - mu_y).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min)
}

/// Covariance of `(X, Y)` split into predictor and response blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCovariance {
    sxx: Array2<f64>,
    sxy: Array2<f64>,
    syy: Array2<f64>,
}

impl BlockCovariance {
    pub fn new(sxx: Array2<f64>, sxy: Array2<f64>, syy: Array2<f64>) -> Result<Self> {
        let (p, q) = (sxx.nrows(), syy.nrows());
        if sxx.dim() != (p, p) || syy.dim() != (q, q) || sxy.dim() != (p, q) || p == 0 || q == 0 {
            return Err(invalid(format!(
                "inconsistent block shapes: sxx {:?}, sxy {:?}, syy {:?}",
                sxx.dim(),
                sxy.dim(),
                syy.dim()
            )));
        }
        let out = Self { sxx, sxy, syy };
        let eig = symmetric_eig(&out.assemble())?;
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(invalid(format!("covariance is not positive semi-definite (min eigenvalue {min})")));
        }
        Ok(out)
    }

    pub fn assemble(&self) -> Array2<f64> {
        let top = concatenate![Axis(1), self.sxx, self.sxy];
        let bottom = concatenate![Axis(1), self.sxy.t(), self.syy];
        concatenate![Axis(0), top, bottom]
    }
}

/// Single Gaussian cluster in general dimension, comparing `k = 1` against a
/// two-way split along the first principal axis of `Y`:
/// `√λ₁ / 2 > u₁ᵀΣ_YXΣ_XYu₁ / √(u₁ᵀΣ_YXΣ_XXΣ_XYu₁)`.
/// A vanishing denominator means `X` carries no information about the split
/// and the right side is taken as zero.
pub fn single_cluster_general_prefers_one(cov: &BlockCovariance) -> Result<bool> {
    let eig = symmetric_eig(&cov.syy)?;
    let lambda = eig.eigenvalues[0];
    if !(lambda > 0.0) {
        return Err(invalid("response covariance has no positive eigenvalue"));
    }
    let u = eig.eigenvectors.column(0);
    let v = cov.sxy.dot(&u);
    let num = v.dot(&v);
    let den = v.dot(&cov.sxx.dot(&v));
    let rhs = if den > 0.0 { num / den.sqrt() } else { 0.0 };
    Ok(lambda.sqrt() / 2.0 > rhs)
}
