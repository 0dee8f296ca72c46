//! Observations-by-features data container and its CSV form.
//!
//! Missing entries are tracked by an optional boolean mask (`true` means
//! observed). In CSV the literal `NA` marks a missing cell.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const MISSING: &str = "NA";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    values: Array2<f64>,
    mask: Option<Array2<bool>>,
    row_ids: Option<Vec<String>>,
    col_ids: Option<Vec<String>>,
}

impl DataMatrix {
    /// Fully observed matrix.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, p) = values.dim();
        if n == 0 || p == 0 {
            return Err(invalid(format!("data matrix must be non-empty, got {n}x{p}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("observed values must be finite"));
        }
        Ok(Self { values, mask: None, row_ids: None, col_ids: None })
    }

    /// Matrix with a missingness mask. Masked-out cells may hold anything;
    /// they are zeroed on construction.
    pub fn with_mask(mut values: Array2<f64>, mask: Array2<bool>) -> Result<Self> {
        let (n, p) = values.dim();
        if n == 0 || p == 0 {
            return Err(invalid(format!("data matrix must be non-empty, got {n}x{p}")));
        }
        if mask.dim() != values.dim() {
            return Err(invalid("mask shape differs from value shape"));
        }
        for (v, &m) in values.iter_mut().zip(mask.iter()) {
            if !m {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(invalid("observed values must be finite"));
            }
        }
        let mask = if mask.iter().all(|&m| m) { None } else { Some(mask) };
        Ok(Self { values, mask, row_ids: None, col_ids: None })
    }

    pub fn with_col_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.ncols() {
            return Err(invalid("column id count differs from column count"));
        }
        self.col_ids = Some(ids);
        Ok(self)
    }

    pub fn with_row_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.nrows() {
            return Err(invalid("row id count differs from row count"));
        }
        self.row_ids = Some(ids);
        Ok(self)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn mask(&self) -> Option<&Array2<bool>> {
        self.mask.as_ref()
    }

    pub fn row_ids(&self) -> Option<&[String]> {
        self.row_ids.as_deref()
    }

    pub fn col_ids(&self) -> Option<&[String]> {
        self.col_ids.as_deref()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[[i, j]])
    }

    pub fn has_missing(&self) -> bool {
        self.mask.is_some()
    }

    /// Mask materialized as a full matrix.
    pub fn observed(&self) -> Array2<bool> {
        match &self.mask {
            Some(m) => m.clone(),
            None => Array2::from_elem(self.values.dim(), true),
        }
    }

    /// Error unless every entry is observed.
    pub fn require_complete(&self, what: &str) -> Result<()> {
        if self.has_missing() {
            Err(Error::Unsupported(format!("{what} requires a fully observed matrix")))
        } else {
            Ok(())
        }
    }

    /// Rows without any missing entry, in their original order.
    pub fn complete_cases(&self) -> Result<Self> {
        let Some(mask) = &self.mask else {
            return Ok(self.clone());
        };
        let keep: Vec<usize> = (0..self.nrows())
            .filter(|&i| mask.row(i).iter().all(|&m| m))
            .collect();
        if keep.is_empty() {
            return Err(invalid("no complete rows"));
        }
        let mut out = Self::new(self.values.select(Axis(0), &keep))?;
        out.col_ids = self.col_ids.clone();
        out.row_ids = self
            .row_ids
            .as_ref()
            .map(|ids| keep.iter().map(|&i| ids[i].clone()).collect());
        Ok(out)
    }

    /// Read CSV. A first row containing any cell that is neither numeric nor
    /// `NA` is taken as the header. Ragged rows are rejected.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut header = None;
        let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| match e.kind() {
                csv::ErrorKind::UnequalLengths { .. } => {
                    Error::Parse(format!("ragged row near line {}", line + 1))
                }
                _ => Error::Csv(e),
            })?;
            let parsed: Vec<Option<Option<f64>>> = record.iter().map(parse_cell).collect();
            if parsed.iter().any(Option::is_none) {
                if line == 0 {
                    header = Some(record.iter().map(str::to_owned).collect::<Vec<_>>());
                    continue;
                }
                let col = parsed.iter().position(Option::is_none).unwrap_or(0);
                return Err(Error::Parse(format!(
                    "non-numeric cell `{}` at line {}, column {}",
                    &record[col],
                    line + 1,
                    col + 1
                )));
            }
            rows.push(parsed.into_iter().flatten().collect());
        }
        if rows.is_empty() {
            return Err(Error::Parse("no data rows".into()));
        }
        let (n, p) = (rows.len(), rows[0].len());
        let mut values = Array2::zeros((n, p));
        let mut mask = Array2::from_elem((n, p), true);
        for (i, row) in rows.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                match cell {
                    Some(v) => values[[i, j]] = *v,
                    None => mask[[i, j]] = false,
                }
            }
        }
        let out = Self::with_mask(values, mask)?;
        match header {
            Some(h) => out.with_col_ids(h),
            None => Ok(out),
        }
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("cannot open {}: {e}", path.display()))))?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    /// Write CSV with `NA` for masked cells; a header is written when column
    /// ids are present. Values use Rust's shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        if let Some(ids) = &self.col_ids {
            wtr.write_record(ids)?;
        }
        for i in 0..self.nrows() {
            let rec: Vec<String> = (0..self.ncols())
                .map(|j| {
                    if self.is_observed(i, j) {
                        format!("{}", self.values[[i, j]])
                    } else {
                        MISSING.to_owned()
                    }
                })
                .collect();
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `Some(None)` is a missing cell, `None` means the cell is not numeric.
fn parse_cell(cell: &str) -> Option<Option<f64>> {
    if cell == MISSING {
        return Some(None);
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn csv_round_trip_with_header_and_missing() {
        let text = "a,b,c\n1,2,3\n4,NA,6.5\n";
        let m = DataMatrix::read_csv(text.as_bytes()).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (2, 3));
        assert_eq!(m.col_ids().unwrap(), ["a", "b", "c"]);
        assert!(!m.is_observed(1, 1));
        assert_eq!(m.values()[[1, 2]], 6.5);

        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), text);
        assert_eq!(DataMatrix::read_csv(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn headerless_csv() {
        let m = DataMatrix::read_csv("1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(m.values(), &array![[1.0, 2.0], [3.0, 4.0]]);
        assert!(m.col_ids().is_none());
        assert!(!m.has_missing());
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = DataMatrix::read_csv("1,2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse(_)), "{err}");
    }

    #[test]
    fn non_numeric_body_cell_rejected() {
        let err = DataMatrix::read_csv("1,2\n3,x\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn complete_cases_drops_rows_with_missing() {
        let m = DataMatrix::read_csv("1,NA\n3,4\n5,6\n".as_bytes()).unwrap();
        let c = m.complete_cases().unwrap();
        assert_eq!(c.values(), &array![[3.0, 4.0], [5.0, 6.0]]);
        assert!(!c.has_missing());
    }

    #[test]
    fn empty_matrix_rejected() {
        assert!(DataMatrix::new(Array2::zeros((0, 3))).is_err());
        assert!(DataMatrix::new(array![[f64::NAN]]).is_err());
    }
}
