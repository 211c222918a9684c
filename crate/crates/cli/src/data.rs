//! Sample files: a header row naming `w`, `y1..y{dY}` and `z1..z{dZ}`,
//! then one unit per row.

use std::io::{Read, Write};
use std::path::Path;

use mirror_ot_core::ObservedSample;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: treatment `{value}` is not 0 or 1")]
    NonBinaryTreatment { row: u64, value: String },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    NonNumericCell { row: u64, column: String, value: String },
    #[error("treatment group {0} has no rows")]
    EmptyGroup(u8),
    #[error("row {row}: {message}")]
    Malformed { row: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Counts `prefix1, prefix2, ...` in the header and returns their positions.
fn indexed_columns(header: &csv::StringRecord, prefix: &str) -> Result<Vec<usize>, DataError> {
    let mut out = Vec::new();
    loop {
        let name = format!("{prefix}{}", out.len() + 1);
        match header.iter().position(|h| h.trim() == name) {
            Some(i) => out.push(i),
            None => break,
        }
    }
    if out.is_empty() {
        return Err(DataError::MissingColumn(format!("{prefix}1")));
    }
    Ok(out)
}

pub fn parse_csv(path: impl AsRef<Path>) -> Result<ObservedSample, DataError> {
    let file = std::fs::File::open(path)?;
    read_csv(file)
}

pub fn read_csv<R: Read>(reader: R) -> Result<ObservedSample, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let w_col = header
        .iter()
        .position(|h| h.trim() == "w")
        .ok_or_else(|| DataError::MissingColumn("w".into()))?;
    let y_cols = indexed_columns(&header, "y")?;
    let z_cols = indexed_columns(&header, "z")?;
    let mut builder = ObservedSample::new(y_cols.len(), z_cols.len());
    let mut y = vec![0.0; y_cols.len()];
    let mut z = vec![0.0; z_cols.len()];
    let (mut n, mut m) = (0usize, 0usize);
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line());
        let w = match record[w_col].trim() {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(DataError::NonBinaryTreatment {
                    row,
                    value: other.to_string(),
                })
            }
        };
        let cell = |col: usize| -> Result<f64, DataError> {
            let raw = record[col].trim();
            raw.parse::<f64>().map_err(|_| DataError::NonNumericCell {
                row,
                column: header[col].to_string(),
                value: raw.to_string(),
            })
        };
        for (slot, &c) in y.iter_mut().zip(&y_cols) {
            *slot = cell(c)?;
        }
        for (slot, &c) in z.iter_mut().zip(&z_cols) {
            *slot = cell(c)?;
        }
        builder.push(w, &y, &z).map_err(|e| DataError::Malformed {
            row,
            message: e.to_string(),
        })?;
        if w == 0 {
            n += 1;
        } else {
            m += 1;
        }
    }
    if n == 0 {
        return Err(DataError::EmptyGroup(0));
    }
    if m == 0 {
        return Err(DataError::EmptyGroup(1));
    }
    builder.finish().map_err(|e| DataError::Malformed {
        row: 0,
        message: e.to_string(),
    })
}

/// Writes values with the shortest representation that parses back exactly.
pub fn write_csv<W: Write>(sample: &ObservedSample, writer: W) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["w".to_string()];
    header.extend((1..=sample.dy()).map(|k| format!("y{k}")));
    header.extend((1..=sample.dz()).map(|k| format!("z{k}")));
    wtr.write_record(&header)?;
    for (w, y, z) in sample.rows() {
        let mut rec = vec![w.to_string()];
        rec.extend(y.iter().chain(z).map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
