//! CSV ingestion for measured spectra and saturation curves.
//!
//! Files may start with a header row and may contain `#` comment lines.
//! Rows with a non-numeric field are rejected with their line number; rows
//! containing NaN are dropped with a warning.

use std::path::Path;

use nanofiber_trap::spectroscopy::{SaturationDataset, SaturationPoint, SpectrumDataset, SpectrumPoint};

use crate::error::CliError;

pub const SPECTRUM_COLUMNS: [&str; 3] = ["detuning_MHz", "transmission", "sigma"];
pub const SATURATION_COLUMNS: [&str; 2] = ["p_in_W", "p_abs_W"];

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// `(line number, values)` for every accepted row.
    pub rows: Vec<(u64, Vec<f64>)>,
    pub warnings: Vec<String>,
}

fn is_header(record: &csv::StringRecord, columns: &[&str]) -> bool {
    record.iter().zip(columns).all(|(f, c)| f.eq_ignore_ascii_case(c)) && record.len() <= columns.len()
}

/// Reads a numeric table with `min_cols..=columns.len()` fields per row.
pub fn read_table(path: &Path, columns: &[&str], min_cols: usize) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_table(&text, &path.display().to_string(), columns, min_cols)
}

pub fn parse_table(text: &str, name: &str, columns: &[&str], min_cols: usize) -> Result<Table, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Ingest(format!("{name}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if first {
            first = false;
            if record.iter().any(|f| f.parse::<f64>().is_err()) {
                if is_header(&record, columns) {
                    continue;
                }
                return Err(CliError::Ingest(format!(
                    "{name}: line {line}: unrecognized header {:?}, expected {}",
                    record.iter().collect::<Vec<_>>(),
                    columns.join(",")
                )));
            }
        }
        if record.len() < min_cols || record.len() > columns.len() {
            return Err(CliError::Ingest(format!(
                "{name}: line {line}: expected {} to {} fields, found {}",
                min_cols,
                columns.len(),
                record.len()
            )));
        }
        let mut values = Vec::with_capacity(record.len());
        for (field, col) in record.iter().zip(columns) {
            let v = field
                .parse::<f64>()
                .map_err(|_| CliError::Ingest(format!("{name}: line {line}: field `{col}` is not a number: {field:?}")))?;
            values.push(v);
        }
        if values.iter().any(|v| v.is_nan()) {
            warnings.push(format!("{name}: line {line}: row contains NaN and was skipped"));
            continue;
        }
        if let Some((col, _)) = values.iter().zip(columns).map(|(v, c)| (c, v)).find(|(_, v)| v.is_infinite()) {
            return Err(CliError::Ingest(format!("{name}: line {line}: field `{col}` is infinite")));
        }
        rows.push((line, values));
    }
    if rows.is_empty() {
        return Err(CliError::Ingest(format!("{name}: no data rows")));
    }
    Ok(Table { rows, warnings })
}

/// Detuning in MHz on disk, Hz in the dataset.
pub fn spectrum(table: &Table) -> Result<SpectrumDataset, CliError> {
    let points = table
        .rows
        .iter()
        .map(|(_, v)| SpectrumPoint { detuning: v[0] * 1e6, transmission: v[1], sigma: v.get(2).copied() })
        .collect();
    Ok(SpectrumDataset::new(points)?)
}

pub fn saturation(table: &Table) -> Result<SaturationDataset, CliError> {
    let points = table.rows.iter().map(|(_, v)| SaturationPoint { incident: v[0], absorbed: v[1] }).collect();
    Ok(SaturationDataset::new(points)?)
}
