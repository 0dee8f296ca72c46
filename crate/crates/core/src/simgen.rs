//! Synthetic clustered data: five benchmark settings plus a custom one.
//!
//! Cluster centers are drawn i.i.d. from `N(0, τ I)` and the whole set is
//! redrawn until every pair is at least `min_sep` apart. By default `τ` is
//! calibrated so that a first draw is accepted about half the time.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::DataMatrix;
use crate::rng::stream;

pub const MAX_CENTER_DRAWS: usize = 10_000;
pub const DEFAULT_MIN_SEP: f64 = 1.0;
pub const DEFAULT_TARGET_ACCEPT: f64 = 0.5;
/// Monte-Carlo draws per calibration.
pub const CALIBRATION_DRAWS: usize = 2000;
const CALIBRATION_SEED: u64 = 0x7a75_ca1b;
const TAU_BRACKET: (f64, f64) = (1e-3, 1e3);
const ACCEPT_TOL: f64 = 0.03;

/// The data-generating family and its parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "setting", rename_all = "snake_case")]
pub enum Setting {
    /// Six clusters in 10 dimensions, compound-symmetric noise with
    /// off-diagonal `rho`.
    Correlated { rho: f64 },
    /// Three clusters in 6 dimensions plus `r` uniform[0, 1] columns.
    NoiseDims { r: usize },
    /// Eight clusters in `dims` dimensions, identity noise.
    HighDim { dims: usize },
    /// Three clusters in 20 dimensions with spherical variances in ratio
    /// `1 : (1 + ratio)/2 : ratio`.
    VarHetero { ratio: f64 },
    /// Five clusters in 15 dimensions, independent `t_nu` noise per
    /// coordinate.
    HeavyTail { nu: f64 },
    /// Spherical Gaussian clusters with variance `noise_var`.
    Custom {
        k_true: usize,
        dims: usize,
        #[serde(default = "one")]
        noise_var: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_min_sep() -> f64 {
    DEFAULT_MIN_SEP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    #[serde(flatten)]
    pub setting: Setting,
    /// Overrides the setting's default cluster sizes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_sizes: Option<Vec<usize>>,
    /// Center scale; calibrated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default = "default_min_sep")]
    pub min_sep: f64,
    pub seed: u64,
}

/// Sizes alternating `big, small, big, ...`.
fn alternating(k: usize, big: usize, small: usize) -> Vec<usize> {
    (0..k).map(|g| if g % 2 == 0 { big } else { small }).collect()
}

impl SimSpec {
    pub fn new(setting: Setting, seed: u64) -> Self {
        Self { setting, cluster_sizes: None, tau: None, min_sep: DEFAULT_MIN_SEP, seed }
    }

    pub fn k_true(&self) -> usize {
        match self.setting {
            Setting::Correlated { .. } => 6,
            Setting::NoiseDims { .. } | Setting::VarHetero { .. } => 3,
            Setting::HighDim { .. } => 8,
            Setting::HeavyTail { .. } => 5,
            Setting::Custom { k_true, .. } => k_true,
        }
    }

    /// Dimension in which the centers live.
    pub fn signal_dims(&self) -> usize {
        match self.setting {
            Setting::Correlated { .. } => 10,
            Setting::NoiseDims { .. } => 6,
            Setting::HighDim { dims } | Setting::Custom { dims, .. } => dims,
            Setting::VarHetero { .. } => 20,
            Setting::HeavyTail { .. } => 15,
        }
    }

    /// Total number of columns.
    pub fn dims(&self) -> usize {
        match self.setting {
            Setting::NoiseDims { r } => 6 + r,
            _ => self.signal_dims(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        if let Some(s) = &self.cluster_sizes {
            return s.clone();
        }
        let k = self.k_true();
        match self.setting {
            Setting::Correlated { .. } | Setting::HighDim { .. } => alternating(k, 100, 50),
            Setting::NoiseDims { .. } => alternating(k, 1000, 500),
            Setting::VarHetero { .. } => vec![60; k],
            Setting::HeavyTail { .. } => vec![80; k],
            Setting::Custom { .. } => vec![50; k],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k_true();
        if k == 0 {
            return Err(invalid("k_true must be at least 1"));
        }
        if self.signal_dims() == 0 {
            return Err(invalid("dims must be at least 1"));
        }
        let sizes = self.sizes();
        if sizes.len() != k {
            return Err(invalid(format!("{} cluster sizes given for {k} clusters", sizes.len())));
        }
        if sizes.contains(&0) {
            return Err(invalid("cluster sizes must be at least 1"));
        }
        if !(self.min_sep >= 0.0 && self.min_sep.is_finite()) {
            return Err(invalid(format!("min_sep must be non-negative, got {}", self.min_sep)));
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(invalid(format!("tau must be positive, got {tau}")));
            }
        }
        match self.setting {
            Setting::Correlated { rho } => {
                let lower = -1.0 / (self.signal_dims() as f64 - 1.0);
                if !(rho > lower && rho < 1.0) {
                    return Err(invalid(format!("rho must lie in ({lower}, 1) for a valid covariance, got {rho}")));
                }
            }
            Setting::VarHetero { ratio } if !(ratio >= 1.0 && ratio.is_finite()) => {
                return Err(invalid(format!("variance ratio must be at least 1, got {ratio}")));
            }
            Setting::HeavyTail { nu } if !(nu >= 2.0 && nu.is_finite()) => {
                return Err(invalid(format!("degrees of freedom must be at least 2, got {nu}")));
            }
            Setting::Custom { noise_var, .. } if !(noise_var >= 0.0 && noise_var.is_finite()) => {
                return Err(invalid(format!("noise variance must be non-negative, got {noise_var}")));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Generated data with zero-based true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub data: DataMatrix,
    pub labels: Vec<usize>,
    pub centers: Array2<f64>,
    pub tau: f64,
}

fn min_pairwise_dist2(z: &Array2<f64>) -> f64 {
    let k = z.nrows();
    let mut best = f64::INFINITY;
    for a in 0..k {
        for b in a + 1..k {
            let d: f64 = z.row(a).iter().zip(z.row(b).iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            best = best.min(d);
        }
    }
    best
}

fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

/// Centers `√τ Z`, redrawn as a set until all pairwise distances reach
/// `min_sep`.
pub fn sample_separated_centers<R: Rng + ?Sized>(
    k: usize,
    dims: usize,
    tau: f64,
    min_sep: f64,
    rng: &mut R,
) -> Result<Array2<f64>> {
    if k == 0 || dims == 0 {
        return Err(invalid("k and dims must be at least 1"));
    }
    if !(tau > 0.0) || !(min_sep >= 0.0) {
        return Err(invalid(format!("need tau > 0 and min_sep >= 0, got {tau} and {min_sep}")));
    }
    let scale = tau.sqrt();
    for _ in 0..MAX_CENTER_DRAWS {
        let centers = standard_normal_matrix(k, dims, rng) * scale;
        if min_pairwise_dist2(&centers) >= min_sep * min_sep {
            return Ok(centers);
        }
    }
    Err(Error::Infeasible(format!(
        "no {k} centers at separation {min_sep} with tau {tau} in {MAX_CENTER_DRAWS} draws"
    )))
}

/// Find `τ` whose first-draw acceptance probability is `target_accept`.
///
/// One batch of standard-normal center sets is reused for every probe, so
/// the estimated acceptance is exactly monotone in `τ` and bisection on
/// `log τ` converges to the crossing point.
pub fn calibrate_tau<R: Rng + ?Sized>(
    k: usize,
    dims: usize,
    min_sep: f64,
    target_accept: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(target_accept > 0.0 && target_accept < 1.0) {
        return Err(invalid(format!("target acceptance must lie in (0, 1), got {target_accept}")));
    }
    if k == 0 || dims == 0 || !(min_sep >= 0.0) {
        return Err(invalid("need k, dims >= 1 and min_sep >= 0"));
    }
    let min_dists: Vec<f64> = (0..CALIBRATION_DRAWS)
        .map(|_| min_pairwise_dist2(&standard_normal_matrix(k, dims, rng)).sqrt())
        .collect();
    let accept = |tau: f64| {
        let need = min_sep / tau.sqrt();
        min_dists.iter().filter(|&&d| d >= need).count() as f64 / min_dists.len() as f64
    };
    let (mut lo, mut hi) = (TAU_BRACKET.0.ln(), TAU_BRACKET.1.ln());
    if accept(lo.exp()) >= target_accept {
        return Ok(TAU_BRACKET.0);
    }
    if accept(hi.exp()) < target_accept {
        return Err(Error::Infeasible(format!(
            "acceptance stays below {target_accept} for tau up to {}",
            TAU_BRACKET.1
        )));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if accept(mid.exp()) < target_accept {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = hi.exp();
    if (accept(tau) - target_accept).abs() > ACCEPT_TOL {
        return Err(Error::Infeasible(format!("acceptance cannot be brought within {ACCEPT_TOL} of {target_accept}")));
    }
    Ok(tau)
}

/// Calibrated `τ` at the default target, memoized per process. Uses a fixed
/// calibration seed so every caller sees the same value.
pub fn default_tau(k: usize, dims: usize, min_sep: f64) -> Result<f64> {
    type TauCache = Mutex<HashMap<(usize, usize, u64), f64>>;
    static CACHE: OnceLock<TauCache> = OnceLock::new();
    let key = (k, dims, min_sep.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&tau) = cache.lock().expect("tau cache poisoned").get(&key) {
        return Ok(tau);
    }
    let tau = calibrate_tau(k, dims, min_sep, DEFAULT_TARGET_ACCEPT, &mut stream(CALIBRATION_SEED, &[k as u64, dims as u64]))?;
    cache.lock().expect("tau cache poisoned").insert(key, tau);
    Ok(tau)
}

/// Lower Cholesky factor of the compound-symmetric matrix.
fn compound_symmetric_factor(p: usize, rho: f64) -> Result<DMatrix<f64>> {
    let sigma = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho });
    sigma
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| invalid(format!("compound-symmetric matrix with rho {rho} is not positive definite")))
}

/// Draw data for `spec`. Rows come in cluster blocks, cluster 0 first.
pub fn generate_setting(spec: &SimSpec) -> Result<SimData> {
    spec.validate()?;
    let k = spec.k_true();
    let signal = spec.signal_dims();
    let sizes = spec.sizes();
    let tau = match spec.tau {
        Some(t) => t,
        None => default_tau(k, signal, spec.min_sep)?,
    };
    let centers = sample_separated_centers(k, signal, tau, spec.min_sep, &mut stream(spec.seed, &[0]))?;
    let mut rng = stream(spec.seed, &[1]);
    let n: usize = sizes.iter().sum();
    let p = spec.dims();
    let mut values = Array2::zeros((n, p));
    let mut labels = Vec::with_capacity(n);
    let factor = match spec.setting {
        Setting::Correlated { rho } => Some(compound_symmetric_factor(signal, rho)?),
        _ => None,
    };
    let t_dist = match spec.setting {
        Setting::HeavyTail { nu } => Some(StudentT::new(nu).map_err(|e| invalid(e.to_string()))?),
        _ => None,
    };
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let mut row = 0;
    for (g, &size) in sizes.iter().enumerate() {
        let sd = match spec.setting {
            Setting::VarHetero { ratio } => [1.0, (1.0 + ratio) / 2.0, ratio][g % 3].sqrt(),
            Setting::Custom { noise_var, .. } => noise_var.sqrt(),
            _ => 1.0,
        };
        for _ in 0..size {
            let noise: Vec<f64> = match (&factor, &t_dist) {
                (Some(l), _) => {
                    let z = DVector::from_fn(signal, |_, _| StandardNormal.sample(&mut rng));
                    (l * z).iter().copied().collect()
                }
                (None, Some(t)) => (0..signal).map(|_| t.sample(&mut rng)).collect(),
                (None, None) => (0..signal)
                    .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                    .collect(),
            };
            for j in 0..signal {
                values[[row, j]] = centers[[g, j]] + noise[j];
            }
            for j in signal..p {
                values[[row, j]] = unit.sample(&mut rng);
            }
            labels.push(g);
            row += 1;
        }
    }
    Ok(SimData { data: DataMatrix::new(values)?, labels, centers, tau })
}

/// `n` draws of a mean-zero pair with unit variances and correlation `rho`.
pub fn correlated_pair<R: Rng + ?Sized>(n: usize, rho: f64, rng: &mut R) -> Result<DataMatrix> {
    if !(rho.abs() <= 1.0) {
        return Err(invalid(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    let c = (1.0 - rho * rho).sqrt();
    let mut values = Array2::zeros((n, 2));
    for mut row in values.outer_iter_mut() {
        let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        row[0] = a;
        row[1] = rho * a + c * b;
    }
    DataMatrix::new(values)
}

/// `n` draws from the equal mixture of `N((mu_x, mu_y), I)` and
/// `N(-(mu_x, mu_y), I)`, with zero-based component labels.
pub fn symmetric_pair_mixture<R: Rng + ?Sized>(
    n: usize,
    mu_x: f64,
    mu_y: f64,
    rng: &mut R,
) -> Result<(DataMatrix, Vec<usize>)> {
    let mut values = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for mut row in values.outer_iter_mut() {
        let g = usize::from(rng.random::<bool>());
        let sign = if g == 0 { 1.0 } else { -1.0 };
        let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        row[0] = sign * mu_x + a;
        row[1] = sign * mu_y + b;
        labels.push(g);
    }
    Ok((DataMatrix::new(values)?, labels))
}
