//! Summaries of selection experiments and clusterings: Wilson intervals,
//! confusion matrices and hypergeometric enrichment tails.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{invalid, Result};
use crate::fmt::sig6;
use crate::theory::std_normal_quantile;

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(invalid("Wilson interval needs at least one trial"));
    }
    if successes > trials {
        return Err(invalid(format!("{successes} successes out of {trials} trials")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let z = std_normal_quantile(0.5 + confidence / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let high = if successes == trials { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok((low, high))
}

/// How often a method picked the true `k` over a batch of replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub method: String,
    pub setting: String,
    pub param: f64,
    pub correct: u64,
    pub total: u64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

impl SelectionSummary {
    /// Counts exact hits of `k_true` among `selections`, with a 95% interval.
    pub fn from_selections(
        method: impl Into<String>,
        setting: impl Into<String>,
        param: f64,
        k_true: usize,
        selections: &[usize],
    ) -> Result<Self> {
        let total = selections.len() as u64;
        let correct = selections.iter().filter(|&&k| k == k_true).count() as u64;
        let (wilson_low, wilson_high) = wilson_interval(correct, total, 0.95)?;
        Ok(Self { method: method.into(), setting: setting.into(), param, correct, total, wilson_low, wilson_high })
    }

    pub fn proportion(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

pub const SUMMARY_HEADER: [&str; 7] = ["method", "setting", "param", "correct", "total", "wilson_low", "wilson_high"];

pub fn write_summaries_csv<W: Write>(summaries: &[SelectionSummary], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SUMMARY_HEADER)?;
    for s in summaries {
        wtr.write_record([
            s.method.clone(),
            s.setting.clone(),
            sig6(s.param),
            s.correct.to_string(),
            s.total.to_string(),
            sig6(s.wilson_low),
            sig6(s.wilson_high),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Cross-tabulation of two labelings with margins. Rows follow the sorted
/// distinct values of the first labeling, columns those of the second.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
    pub counts: Vec<Vec<u64>>,
    pub row_totals: Vec<u64>,
    pub col_totals: Vec<u64>,
    pub total: u64,
}

pub fn confusion_matrix(labels_a: &[usize], labels_b: &[usize]) -> Result<ConfusionMatrix> {
    if labels_a.len() != labels_b.len() {
        return Err(invalid(format!("labelings differ in length: {} vs {}", labels_a.len(), labels_b.len())));
    }
    let index = |labels: &[usize]| -> BTreeMap<usize, usize> {
        let mut m: BTreeMap<usize, usize> = labels.iter().map(|&l| (l, 0)).collect();
        for (pos, v) in m.values_mut().enumerate() {
            *v = pos;
        }
        m
    };
    let (ra, cb) = (index(labels_a), index(labels_b));
    let mut counts = vec![vec![0u64; cb.len()]; ra.len()];
    for (a, b) in labels_a.iter().zip(labels_b) {
        counts[ra[a]][cb[b]] += 1;
    }
    let row_totals: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
    let col_totals: Vec<u64> = (0..cb.len()).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
    Ok(ConfusionMatrix {
        row_labels: ra.into_keys().collect(),
        col_labels: cb.into_keys().collect(),
        counts,
        row_totals,
        col_totals,
        total: labels_a.len() as u64,
    })
}

/// `P(X >= observed)` for `X` hypergeometric: `cluster_size` draws without
/// replacement from `population` items of which `category_size` are marked.
pub fn enrichment_pvalue(observed: u64, cluster_size: u64, category_size: u64, population: u64) -> Result<f64> {
    if cluster_size > population || category_size > population {
        return Err(invalid(format!(
            "cluster ({cluster_size}) and category ({category_size}) must not exceed population ({population})"
        )));
    }
    let top = cluster_size.min(category_size);
    if observed > top {
        return Err(invalid(format!("observed count {observed} exceeds min(cluster, category) = {top}")));
    }
    let bottom = (cluster_size + category_size).saturating_sub(population);
    if observed <= bottom {
        return Ok(1.0);
    }
    let log_total = ln_binomial(population, cluster_size);
    let p: f64 = (observed..=top)
        .map(|x| {
            (ln_binomial(category_size, x) + ln_binomial(population - category_size, cluster_size - x) - log_total).exp()
        })
        .sum();
    Ok(p.min(1.0))
}

/// Per-test level `alpha / tests`.
pub fn bonferroni_threshold(alpha: f64, tests: usize) -> Result<f64> {
    if tests == 0 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("Bonferroni threshold needs alpha in (0, 1) and at least one test"));
    }
    Ok(alpha / tests as f64)
}
