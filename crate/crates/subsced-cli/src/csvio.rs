//! Strict CSV ingestion: comma separated, '.' decimal, header required,
//! UTF-8, LF or CRLF. Every cell must parse as a finite double; missing
//! cells are a hard error.

use nalgebra::{DMatrix, DVector};

use crate::CliError;

pub struct DataFrame {
    pub columns: Vec<String>,
    /// Column-major storage.
    pub data: Vec<Vec<f64>>,
}

impl DataFrame {
    pub fn read(path: &str) -> Result<DataFrame, CliError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| CliError::validation(format!("cannot open {path}: {e}")))?;
        let columns: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::validation(format!("bad header in {path}: {e}")))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if columns.is_empty() {
            return Err(CliError::validation(format!("{path} has no columns")));
        }
        let mut data: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
        for (line, record) in reader.records().enumerate() {
            let record =
                record.map_err(|e| CliError::validation(format!("row {line}: {e}")))?;
            if record.len() != columns.len() {
                return Err(CliError::validation(format!(
                    "row {line} has {} cells, expected {}",
                    record.len(),
                    columns.len()
                )));
            }
            for (c, cell) in record.iter().enumerate() {
                let cell = cell.trim();
                if cell.is_empty() {
                    return Err(CliError::validation(format!(
                        "missing cell at row {line}, column {}",
                        columns[c]
                    )));
                }
                let value: f64 = cell.parse().map_err(|_| {
                    CliError::validation(format!(
                        "cell '{cell}' at row {line}, column {} is not numeric",
                        columns[c]
                    ))
                })?;
                if !value.is_finite() {
                    return Err(CliError::validation(format!(
                        "non-finite value at row {line}, column {}",
                        columns[c]
                    )));
                }
                data[c].push(value);
            }
        }
        if data[0].is_empty() {
            return Err(CliError::validation(format!("{path} has no data rows")));
        }
        Ok(DataFrame { columns, data })
    }

    pub fn nrows(&self) -> usize {
        self.data[0].len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|i| self.data[i].as_slice())
    }

    /// Split into a response vector and the design matrix formed by the
    /// remaining columns (optionally with a leading intercept column).
    pub fn design_and_response(
        &self,
        response: &str,
        intercept: bool,
    ) -> Result<(DMatrix<f64>, DVector<f64>, Vec<String>), CliError> {
        let y_index = self
            .columns
            .iter()
            .position(|c| c == response)
            .ok_or_else(|| CliError::validation(format!("response column '{response}' not found")))?;
        let n = self.nrows();
        let regressors: Vec<usize> =
            (0..self.columns.len()).filter(|&i| i != y_index).collect();
        if regressors.is_empty() && !intercept {
            return Err(CliError::validation("no regressor columns".into()));
        }
        let extra = usize::from(intercept);
        let p = regressors.len() + extra;
        let mut x = DMatrix::zeros(n, p);
        let mut names = Vec::with_capacity(p);
        if intercept {
            for i in 0..n {
                x[(i, 0)] = 1.0;
            }
            names.push("(intercept)".to_string());
        }
        for (j, &col) in regressors.iter().enumerate() {
            for i in 0..n {
                x[(i, j + extra)] = self.data[col][i];
            }
            names.push(self.columns[col].clone());
        }
        let y = DVector::from_fn(n, |i, _| self.data[y_index][i]);
        Ok((x, y, names))
    }
}

/// One-column weights file: a `weight` header is accepted but optional.
pub fn read_weights(path: &str) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::validation(format!("cannot open {path}: {e}")))?;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::validation(format!("row {line}: {e}")))?;
        if record.len() != 1 {
            return Err(CliError::validation(format!(
                "weights file must have exactly one column (row {line})"
            )));
        }
        let cell = record[0].trim();
        if line == 0 && cell.parse::<f64>().is_err() {
            continue; // header row
        }
        let value: f64 = cell
            .parse()
            .map_err(|_| CliError::validation(format!("bad weight '{cell}' at row {line}")))?;
        out.push(value);
    }
    if out.is_empty() {
        return Err(CliError::validation(format!("{path} contains no weights")));
    }
    Ok(out)
}

/// Integer-label column (group or batch memberships).
pub fn read_labels(path: &str) -> Result<Vec<usize>, CliError> {
    let raw = read_weights(path)?;
    raw.into_iter()
        .map(|v| {
            if v.fract() == 0.0 && v >= 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::validation(format!("label {v} is not a non-negative integer")))
            }
        })
        .collect()
}

pub fn write_weights(path: &str, weights: &[f64]) -> Result<(), CliError> {
    let mut out = String::from("weight\n");
    for w in weights {
        out.push_str(&format!("{w}\n"));
    }
    std::fs::write(path, out).map_err(|e| CliError::validation(format!("cannot write {path}: {e}")))
}
