//! Benchmark data files: `<dir>/<name>.csv`, optionally with a companion
//! `<name>_labels.csv` holding reference classes.

use std::path::Path;

use anyhow::Context;
use clustcv::DataMatrix;

pub const LABEL_SUFFIX: &str = "_labels";

/// Dataset stems in `dir`, sorted, skipping label files.
pub fn list(dir: &Path) -> anyhow::Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("cannot read data directory {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                if !stem.ends_with(LABEL_SUFFIX) {
                    names.push(stem.to_owned());
                }
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Loads a dataset and drops rows with missing entries.
pub fn load(dir: &Path, name: &str) -> anyhow::Result<DataMatrix> {
    let path = dir.join(format!("{name}.csv"));
    let data = DataMatrix::from_csv_path(&path).with_context(|| format!("loading {}", path.display()))?;
    Ok(data.complete_cases()?)
}
