//! CSV ingestion for real-data runs.

use std::collections::BTreeMap;
use std::path::Path;

use ldpsgd::Observation;
use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, Result};

pub const INTERCEPT: &str = "intercept";

/// Encoded design matrix (intercept first) and response, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Covariate names; the first is [`INTERCEPT`].
    pub columns: Vec<String>,
    pub response: String,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn observation(&self, i: usize) -> ldpsgd::Result<Observation> {
        Observation::new(self.x.row(i).transpose(), self.y[i])
    }

    pub fn observations(&self) -> impl Iterator<Item = ldpsgd::Result<Observation>> + '_ {
        (0..self.rows()).map(|i| self.observation(i))
    }

    /// Writes the response followed by the covariates (intercept omitted).
    /// Reloading with `standardize = false` reproduces the same matrix.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.response.as_str()];
        header.extend(self.columns[1..].iter().map(String::as_str));
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(self.dim());
        for i in 0..self.rows() {
            row.clear();
            row.push(self.y[i].to_string());
            row.extend((1..self.dim()).map(|j| self.x[(i, j)].to_string()));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Report(e.to_string()))?;
        crate::output::write_atomic(path, &bytes)
    }
}

/// Reads a headered, comma-delimited file. Columns listed in `categorical`
/// are mapped to their ordinal codes and left unscaled; every other column
/// (response included) is centered and scaled to unit sample standard
/// deviation when `standardize` is set.
pub fn load_csv(
    path: &Path,
    response: &str,
    standardize: bool,
    categorical: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::Data {
                path: path.to_path_buf(),
                message: format!("{other:?}"),
            },
        })?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let data_err = |message: String| CliError::Data {
        path: path.to_path_buf(),
        message,
    };
    let response_idx = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| data_err(format!("response column '{response}' not found in header")))?;
    for name in categorical.keys() {
        if !headers.contains(name) {
            return Err(data_err(format!("categorical column '{name}' not found in header")));
        }
    }
    if headers.iter().any(|h| h == INTERCEPT) {
        return Err(data_err(format!("column name '{INTERCEPT}' is reserved")));
    }

    let width = headers.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); width];
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(data_err(format!(
                "line {line}: expected {width} fields, found {}",
                record.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            let cell_err = |message: String| CliError::Cell {
                path: path.to_path_buf(),
                line,
                column: headers[j].clone(),
                message,
            };
            if cell.is_empty() {
                return Err(cell_err("missing value".into()));
            }
            let value = match categorical.get(&headers[j]) {
                Some(codes) => *codes
                    .get(cell)
                    .ok_or_else(|| cell_err(format!("level '{cell}' has no code in the mapping table")))?,
                None => cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| cell_err(format!("non-numeric value '{cell}'")))?,
            };
            columns[j].push(value);
        }
    }
    let n = columns[0].len();
    if n == 0 {
        return Err(data_err("no data rows".into()));
    }

    if standardize {
        for (j, col) in columns.iter_mut().enumerate() {
            if !categorical.contains_key(&headers[j]) {
                standardize_column(col).map_err(|m| data_err(format!("column '{}': {m}", headers[j])))?;
            }
        }
    }

    let mut names = vec![INTERCEPT.to_string()];
    let covariates: Vec<usize> = (0..width).filter(|&j| j != response_idx).collect();
    names.extend(covariates.iter().map(|&j| headers[j].clone()));
    let x = DMatrix::from_fn(n, covariates.len() + 1, |i, k| {
        if k == 0 {
            1.0
        } else {
            columns[covariates[k - 1]][i]
        }
    });
    Ok(Dataset {
        columns: names,
        response: response.to_string(),
        x,
        y: DVector::from_vec(std::mem::take(&mut columns[response_idx])),
    })
}

fn standardize_column(col: &mut [f64]) -> std::result::Result<(), String> {
    if col.len() < 2 {
        return Err("need at least two rows to standardize".into());
    }
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if sd.is_nan() || sd <= 1e-12 * mean.abs().max(f64::MIN_POSITIVE) {
        return Err("zero variance column".into());
    }
    for v in col.iter_mut() {
        *v = (*v - mean) / sd;
    }
    Ok(())
}
