//! JSON side-file describing general linear constraints for the CLI: the
//! coefficient matrix, bounds, event marginals, and the names of CSV columns
//! holding the per-sample event posteriors.

use serde::Deserialize;

use crate::constraints::GeneralConstraint;

use super::csv_io::CsvTable;
use super::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralSpecFile {
    /// `b[l][j]` coefficients.
    pub coefficients: Vec<Vec<f64>>,
    /// Right-hand bounds `c[l]`.
    pub bounds: Vec<f64>,
    /// Event marginals `Pr(E_lj)`.
    pub marginals: Vec<Vec<f64>>,
    /// CSV column names carrying `Pr(E_lj | x_i)`, indexed `[l][j]`.
    pub posterior_columns: Vec<Vec<String>>,
}

/// Parse the JSON spec; the entry point exercised by the fuzz targets.
pub fn parse_general_spec(bytes: &[u8]) -> Result<GeneralSpecFile, CliError> {
    let spec: GeneralSpecFile = serde_json::from_slice(bytes)
        .map_err(|e| CliError::Schema(format!("general constraint spec: {e}")))?;
    let l = spec.coefficients.len();
    if l == 0
        || spec.bounds.len() != l
        || spec.marginals.len() != l
        || spec.posterior_columns.len() != l
    {
        return Err(CliError::Schema(
            "general constraint spec: coefficients, bounds, marginals and posterior_columns must all have L rows"
                .into(),
        ));
    }
    let j = spec.coefficients[0].len();
    for row in 0..l {
        if spec.coefficients[row].len() != j
            || spec.marginals[row].len() != j
            || spec.posterior_columns[row].len() != j
        {
            return Err(CliError::Schema(format!(
                "general constraint spec: constraint {row} does not have {j} events"
            )));
        }
    }
    Ok(spec)
}

/// Materialize the constraint for a concrete table by reading the posterior
/// columns.
pub fn to_constraint(
    spec: &GeneralSpecFile,
    table: &CsvTable,
) -> Result<GeneralConstraint, CliError> {
    let mut posteriors = Vec::with_capacity(spec.coefficients.len());
    for cols in &spec.posterior_columns {
        let mut per_event = Vec::with_capacity(cols.len());
        for col in cols {
            let idx = table.column_index(col)?;
            let mut values = Vec::with_capacity(table.rows.len());
            for (row, raw) in table.column(idx).enumerate() {
                let v: f64 = raw.trim().parse().map_err(|_| {
                    CliError::Schema(format!(
                        "row {}, column `{col}`: `{raw}` is not a number",
                        row + 2
                    ))
                })?;
                values.push(v);
            }
            per_event.push(values);
        }
        posteriors.push(per_event);
    }
    Ok(GeneralConstraint {
        coefficients: spec.coefficients.clone(),
        bounds: spec.bounds.clone(),
        marginals: spec.marginals.clone(),
        posteriors,
    })
}
