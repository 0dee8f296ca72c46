//! Named `k`-selection strategies behind a common trait, so callers can
//! choose one at runtime.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gabriel::{gabriel_select_k, gabriel_select_k_corrected, GabrielConfig};
use crate::matrix::DataMatrix;
use crate::report::CvReport;
use crate::rng::seeded;
use crate::wold::{wold_select_k_auto, WoldConfig};

pub trait KSelector: Send + Sync {
    fn name(&self) -> &'static str;

    /// Cross-validation report over `k_grid`; all randomness comes from `seed`.
    fn select(&self, data: &DataMatrix, k_grid: &[usize], seed: u64) -> Result<CvReport>;
}

pub struct GabrielSelector(pub GabrielConfig);

impl KSelector for GabrielSelector {
    fn name(&self) -> &'static str {
        "gabriel"
    }

    fn select(&self, data: &DataMatrix, k_grid: &[usize], seed: u64) -> Result<CvReport> {
        gabriel_select_k(data, k_grid, &self.0, &mut seeded(seed))
    }
}

pub struct CorrectedGabrielSelector(pub GabrielConfig);

impl KSelector for CorrectedGabrielSelector {
    fn name(&self) -> &'static str {
        "corrected"
    }

    fn select(&self, data: &DataMatrix, k_grid: &[usize], seed: u64) -> Result<CvReport> {
        Ok(gabriel_select_k_corrected(data, k_grid, &self.0, &mut seeded(seed))?.report)
    }
}

pub struct WoldSelector(pub WoldConfig);

impl KSelector for WoldSelector {
    fn name(&self) -> &'static str {
        "wold"
    }

    fn select(&self, data: &DataMatrix, k_grid: &[usize], seed: u64) -> Result<CvReport> {
        wold_select_k_auto(data, k_grid, &self.0, &mut seeded(seed))
    }
}

#[derive(Default)]
pub struct SelectorRegistry {
    entries: BTreeMap<&'static str, Box<dyn KSelector>>,
}

impl SelectorRegistry {
    /// `gabriel`, `corrected` and `wold` sharing the given settings.
    pub fn with_defaults(gabriel: GabrielConfig, wold: WoldConfig) -> Self {
        let mut reg = Self::default();
        reg.register(Box::new(GabrielSelector(gabriel)));
        reg.register(Box::new(CorrectedGabrielSelector(gabriel)));
        reg.register(Box::new(WoldSelector(wold)));
        reg
    }

    /// Adds or replaces the selector under its name.
    pub fn register(&mut self, selector: Box<dyn KSelector>) {
        self.entries.insert(selector.name(), selector);
    }

    pub fn get(&self, name: &str) -> Result<&dyn KSelector> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownSelector(name.to_owned()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}
