//! Building a Gaussian market model from tabular data: select predictor
//! and target columns, keep complete cases, and form the uncorrected
//! dispersion matrix about zero.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{GaussianError, GaussianModel};

/// How to read the CSV file. Empty cells always count as missing; the
/// sentinel adds a second missing marker (many published datasets use
/// `"*"`).
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub has_header: bool,
    pub missing_sentinel: Option<String>,
    /// When set, the number of complete cases must match exactly.
    pub expected_rows: Option<usize>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: false,
            missing_sentinel: Some("*".to_string()),
            expected_rows: None,
        }
    }
}

/// Column indices are 1-based, matching how published datasets document
/// their layout. Returns the model and the number of complete cases used.
pub fn load_dispersion(
    path: &Path,
    x_cols: &[usize],
    z_cols: &[usize],
    y_col: usize,
    opts: &CsvOptions,
) -> Result<(GaussianModel, usize), GaussianError> {
    load_dispersion_from_reader(File::open(path)?, x_cols, z_cols, y_col, opts)
}

pub fn load_dispersion_from_reader<R: Read>(
    reader: R,
    x_cols: &[usize],
    z_cols: &[usize],
    y_col: usize,
    opts: &CsvOptions,
) -> Result<(GaussianModel, usize), GaussianError> {
    // Model coordinate order: x block, z block, target last.
    let cols: Vec<usize> = x_cols.iter().chain(z_cols).chain([&y_col]).copied().collect();
    assert!(
        cols.iter().all(|&c| c >= 1),
        "column indices are 1-based"
    );
    let p = cols.len();

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut names: Vec<String> = cols.iter().map(|c| format!("c{c}")).collect();
    let mut rows: Vec<DVector<f64>> = Vec::new();

    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        if opts.has_header && row_idx == 0 {
            for (slot, &c) in names.iter_mut().zip(&cols) {
                if let Some(field) = record.get(c - 1) {
                    if !field.is_empty() {
                        *slot = field.to_string();
                    }
                }
            }
            continue;
        }

        let mut values = DVector::zeros(p);
        let mut complete = true;
        for (slot, &c) in cols.iter().enumerate() {
            let field = record.get(c - 1).unwrap_or("");
            let missing =
                field.is_empty() || opts.missing_sentinel.as_deref() == Some(field);
            if missing {
                complete = false;
                break;
            }
            values[slot] = field.parse::<f64>().map_err(|_| {
                GaussianError::NonNumericCell {
                    row: row_idx + 1,
                    col: c,
                    cell: field.to_string(),
                }
            })?;
        }
        if complete {
            rows.push(values);
        }
    }

    let n = rows.len();
    if let Some(expected) = opts.expected_rows {
        if n != expected {
            return Err(GaussianError::DatasetShapeMismatch {
                expected,
                found: n,
            });
        }
    }
    if n == 0 {
        return Err(GaussianError::DatasetShapeMismatch {
            expected: opts.expected_rows.unwrap_or(1),
            found: 0,
        });
    }

    // Dispersion about zero: S = (1/n) sum w w', no mean correction.
    let mut s = DMatrix::zeros(p, p);
    for w in &rows {
        s.ger(1.0 / n as f64, w, w, 1.0);
    }

    let y_name = names.pop().expect("target column present");
    let z_names = names.split_off(x_cols.len());
    let model = GaussianModel::new(names, z_names, y_name, DVector::zeros(p), s)?;
    Ok((model, n))
}
