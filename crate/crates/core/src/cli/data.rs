//! Comma-separated input with a header row. Cells in referenced columns must
//! parse as finite numbers with a `.` decimal point; anything else is an
//! error rather than a silently imputed value.

use std::path::Path;

use csv::StringRecord;
use nalgebra::DMatrix;

use super::{CliError, CliResult};
use crate::model::ObservationSet;

use super::config::RunConfig;

#[derive(Debug, Clone)]
pub struct Table {
    source: String,
    headers: Vec<String>,
    records: Vec<StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let headers = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let records = reader
            .records()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| csv_error(path, e))?;
        Ok(Self {
            source: path.display().to_string(),
            headers,
            records,
        })
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn records(&self) -> &[StringRecord] {
        &self.records
    }

    pub fn nrows(&self) -> usize {
        self.records.len()
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Names from `wanted` absent from the header, in the order given.
    pub fn missing<'a>(&self, wanted: &[&'a str]) -> Vec<&'a str> {
        wanted.iter().copied().filter(|c| self.position(c).is_none()).collect()
    }

    pub fn require(&self, wanted: &[&str]) -> CliResult<()> {
        let missing = self.missing(wanted);
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CliError::Data(format!(
                "{}: missing column(s): {}",
                self.source,
                missing.join(", ")
            )))
        }
    }

    pub fn numeric_column(&self, name: &str) -> CliResult<Vec<f64>> {
        let idx = self
            .position(name)
            .ok_or_else(|| CliError::Data(format!("{}: missing column(s): {name}", self.source)))?;
        self.records
            .iter()
            .enumerate()
            .map(|(row, rec)| {
                let cell = rec.get(idx).unwrap_or("");
                parse_cell(cell).ok_or_else(|| {
                    CliError::Data(format!(
                        "{}: row {}, column `{name}`: `{cell}` is not a finite number",
                        self.source,
                        row + 2
                    ))
                })
            })
            .collect()
    }

    pub fn numeric_matrix(&self, columns: &[String]) -> CliResult<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.nrows(), columns.len());
        for (j, c) in columns.iter().enumerate() {
            let values = self.numeric_column(c)?;
            m.set_column(j, &nalgebra::DVector::from_vec(values));
        }
        Ok(m)
    }

    /// Observations described by `cfg` (outcome, weights, design columns).
    pub fn observations(&self, cfg: &RunConfig) -> CliResult<ObservationSet> {
        self.require(&cfg.fit_columns())?;
        if self.nrows() == 0 {
            return Err(CliError::Data(format!("{}: no data rows", self.source)));
        }
        let y = self.numeric_column(&cfg.y_column)?;
        let w = cfg
            .weight_column
            .as_deref()
            .map(|c| self.numeric_column(c))
            .transpose()?;
        let x = self.numeric_matrix(&cfg.columns)?;
        ObservationSet::new(y, x, w).map_err(|e| CliError::Data(format!("{}: {e}", self.source)))
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    // `f64::from_str` also accepts "inf" and "NaN", which are not data.
    let v: f64 = cell.parse().ok()?;
    v.is_finite().then_some(v)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}
