//! CSV ingestion and emission for the command-line front end.
//!
//! Input files are comma-separated with a required header row. Protected and
//! label columns may hold strings or integers; the protected alphabet is
//! built from first appearance at fit time and pinned by the model afterward.

use std::io::Read;

use crate::data::Dataset;

use super::CliError;

#[derive(Debug, Clone)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column_index(&self, name: &str) -> Result<usize, CliError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Schema(format!("column `{name}` not found in header")))
    }

    pub fn column(&self, idx: usize) -> impl Iterator<Item = &str> {
        self.rows.iter().map(move |r| r[idx].as_str())
    }
}

pub fn read_table(reader: impl Read) -> Result<CsvTable, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Schema(format!("cannot read CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() {
        return Err(CliError::Schema("CSV header is empty".into()));
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::Schema(format!("CSV row {}: {e}", i + 2)))?;
        if record.len() != headers.len() {
            return Err(CliError::Schema(format!(
                "CSV row {} has {} fields, header has {}",
                i + 2,
                record.len(),
                headers.len()
            )));
        }
        rows.push(record.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(CliError::Schema("CSV has no data rows".into()));
    }
    Ok(CsvTable { headers, rows })
}

/// Which columns play which role when binding a CSV into a [`Dataset`].
#[derive(Debug, Clone, Default)]
pub struct ColumnBindings {
    pub protected_col: Option<String>,
    pub label_col: Option<String>,
    pub score_col: Option<String>,
    pub feature_cols: Vec<String>,
}

/// A dataset plus the group alphabet discovered (or enforced) during binding.
#[derive(Debug, Clone)]
pub struct BoundData {
    pub dataset: Dataset,
    pub group_names: Vec<String>,
}

fn parse_float(raw: &str, row: usize, col: &str) -> Result<f64, CliError> {
    raw.trim().parse::<f64>().map_err(|_| {
        CliError::Schema(format!("row {}, column `{col}`: `{raw}` is not a number", row + 2))
    })
}

/// Bind a parsed table to a dataset. When `known_groups` is given (transform
/// against a fitted model), unseen group values are schema errors; otherwise
/// the alphabet is built from first appearance.
pub fn bind_dataset(
    table: &CsvTable,
    bindings: &ColumnBindings,
    known_groups: Option<&[String]>,
) -> Result<BoundData, CliError> {
    let n = table.rows.len();

    let mut group_names: Vec<String> = known_groups.map(<[String]>::to_vec).unwrap_or_default();
    let protected = match &bindings.protected_col {
        Some(col) => {
            let idx = table.column_index(col)?;
            let mut ids = Vec::with_capacity(n);
            for (row, raw) in table.column(idx).enumerate() {
                let value = raw.trim();
                match group_names.iter().position(|g| g == value) {
                    Some(id) => ids.push(id),
                    None if known_groups.is_none() => {
                        group_names.push(value.to_string());
                        ids.push(group_names.len() - 1);
                    }
                    None => {
                        return Err(CliError::Schema(format!(
                            "row {}, column `{col}`: unknown group `{value}`",
                            row + 2
                        )))
                    }
                }
            }
            Some(ids)
        }
        None => None,
    };
    let group_count = group_names.len().max(1);

    let labels = match &bindings.label_col {
        Some(col) => {
            let idx = table.column_index(col)?;
            let mut out = Vec::with_capacity(n);
            for (row, raw) in table.column(idx).enumerate() {
                match raw.trim() {
                    "0" => out.push(0u8),
                    "1" => out.push(1u8),
                    other => {
                        return Err(CliError::Schema(format!(
                            "row {}, column `{col}`: label `{other}` is not 0 or 1",
                            row + 2
                        )))
                    }
                }
            }
            Some(out)
        }
        None => None,
    };

    let base_scores = match &bindings.score_col {
        Some(col) => {
            let idx = table.column_index(col)?;
            let mut out = Vec::with_capacity(n);
            for (row, raw) in table.column(idx).enumerate() {
                let v = parse_float(raw, row, col)?;
                if v.is_nan() || !(0.0..=1.0).contains(&v) {
                    return Err(CliError::Schema(format!(
                        "row {}, column `{col}`: score {v} outside [0, 1]",
                        row + 2
                    )));
                }
                out.push(v);
            }
            Some(out)
        }
        None => None,
    };

    let mut feature_idx = Vec::with_capacity(bindings.feature_cols.len());
    for col in &bindings.feature_cols {
        feature_idx.push((col.as_str(), table.column_index(col)?));
    }
    let mut features = Vec::with_capacity(n);
    for (row_no, row) in table.rows.iter().enumerate() {
        let mut f = Vec::with_capacity(feature_idx.len());
        for &(col, idx) in &feature_idx {
            f.push(parse_float(&row[idx], row_no, col)?);
        }
        features.push(f);
    }

    let dataset = Dataset::new(features, protected, group_count, labels, base_scores, None)
        .map_err(|e| CliError::Schema(e.to_string()))?;
    Ok(BoundData { dataset, group_names })
}

/// Parse raw CSV bytes straight into a dataset; the entry point exercised by
/// the fuzz targets.
pub fn parse_dataset_csv_bytes(
    bytes: &[u8],
    bindings: &ColumnBindings,
) -> Result<BoundData, CliError> {
    let table = read_table(bytes)?;
    bind_dataset(&table, bindings, None)
}

/// Shortest round-trip float formatting (what `Display` produces for `f64`).
pub fn fmt_float(v: f64) -> String {
    format!("{v}")
}

pub fn write_csv(
    path: &std::path::Path,
    headers: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_path(path)
        .map_err(|e| CliError::Schema(format!("cannot write `{}`: {e}", path.display())))?;
    wtr.write_record(headers)
        .map_err(|e| CliError::Internal(format!("CSV write failed: {e}")))?;
    for row in rows {
        wtr.write_record(&row)
            .map_err(|e| CliError::Internal(format!("CSV write failed: {e}")))?;
    }
    wtr.flush().map_err(|e| CliError::Internal(format!("CSV flush failed: {e}")))?;
    Ok(())
}
