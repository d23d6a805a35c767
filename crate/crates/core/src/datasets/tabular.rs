use std::path::Path;

use super::Dataset;
use crate::numerics::Matrix;
use crate::{Error, Result};

/// Load a numeric CSV with a header row. `label_column` names the integer
/// label column; all other columns become features.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let label_at = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::Parse {
            line: 1,
            detail: format!("unknown label column {label_column:?}"),
        })?;
    let d = headers.len() - 1;

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            detail: e.to_string(),
        })?;
        for (j, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if j == label_at {
                let y: usize = cell.parse().map_err(|_| Error::Parse {
                    line,
                    detail: format!("label {cell:?} is not a non-negative integer"),
                })?;
                labels.push(y);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    line,
                    detail: format!("cell {cell:?} in column {} is not numeric", j + 1),
                })?;
                data.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(Matrix::from_vec(labels.len(), d, data)?, labels)
}
