//! Coded dataset CSV: header = variable names plus `year`, cells are state
//! labels, the empty string is missing.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::NetworkSchema;

pub const YEAR_COLUMN: &str = "year";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based file line (the header is line 1).
    pub line: u64,
    pub column: String,
    pub value: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub total_rows: usize,
    pub loaded_rows: usize,
    pub missing_cells: usize,
    pub missing_by_column: BTreeMap<String, usize>,
    pub rejected: Vec<RejectedRow>,
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Csv {
        line,
        column: None,
        message: e.to_string(),
    }
}

pub fn load_dataset<R: Read>(
    reader: R,
    schema: &NetworkSchema,
    id: impl Into<String>,
) -> Result<(Dataset, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Fields)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();

    let mut col_of_var = vec![usize::MAX; schema.len()];
    let mut year_col = None;
    for (i, h) in headers.iter().enumerate() {
        if h == YEAR_COLUMN {
            year_col = Some(i);
        } else if let Some(v) = schema.index_of(h) {
            if col_of_var[v] != usize::MAX {
                return Err(Error::Csv {
                    line: 1,
                    column: Some(h.to_owned()),
                    message: "column appears twice".into(),
                });
            }
            col_of_var[v] = i;
        } else {
            return Err(Error::Csv {
                line: 1,
                column: Some(h.to_owned()),
                message: "unknown column".into(),
            });
        }
    }
    let Some(year_col) = year_col else {
        return Err(Error::Csv {
            line: 1,
            column: Some(YEAR_COLUMN.into()),
            message: "missing required column".into(),
        });
    };
    if let Some(v) = col_of_var.iter().position(|&c| c == usize::MAX) {
        return Err(Error::Csv {
            line: 1,
            column: Some(schema.name(v).to_owned()),
            message: "missing required column".into(),
        });
    }

    let mut data = Dataset::new(id, schema.clone());
    let mut report = IngestReport::default();
    let mut states = vec![None; schema.len()];
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record).map_err(csv_err)? {
        let line = record.position().map_or(0, |p| p.line());
        report.total_rows += 1;
        let year_cell = &record[year_col];
        let Ok(year) = year_cell.parse::<i32>() else {
            report.rejected.push(RejectedRow {
                line,
                column: YEAR_COLUMN.into(),
                value: year_cell.to_owned(),
                reason: "year must be an integer".into(),
            });
            continue;
        };
        let mut bad = None;
        for (v, &c) in col_of_var.iter().enumerate() {
            let cell = &record[c];
            states[v] = if cell.is_empty() {
                None
            } else {
                match schema.variable(v).state_index(cell) {
                    Some(s) => Some(s),
                    None => {
                        bad = Some(RejectedRow {
                            line,
                            column: schema.name(v).to_owned(),
                            value: cell.to_owned(),
                            reason: format!(
                                "unknown label (expected one of {})",
                                schema.variable(v).states().join(", ")
                            ),
                        });
                        break;
                    }
                }
            };
        }
        if let Some(r) = bad {
            report.rejected.push(r);
            continue;
        }
        for (v, s) in states.iter().enumerate() {
            if s.is_none() {
                report.missing_cells += 1;
                *report
                    .missing_by_column
                    .entry(schema.name(v).to_owned())
                    .or_default() += 1;
            }
        }
        data.push_row(&states, year)?;
        report.loaded_rows += 1;
    }
    Ok((data, report))
}

pub fn load_dataset_path(path: &Path, schema: &NetworkSchema) -> Result<(Dataset, IngestReport)> {
    let file = File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    let id = path
        .file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    load_dataset(std::io::BufReader::new(file), schema, id)
}

pub fn save_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let schema = data.schema();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = schema.variables().iter().map(|v| v.name()).collect();
    header.push(YEAR_COLUMN);
    w.write_record(&header).map_err(csv_err)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for r in 0..data.n_rows() {
        rec.clear();
        for v in 0..schema.len() {
            rec.push(
                data.get(r, v)
                    .map(|s| schema.variable(v).states()[s].clone())
                    .unwrap_or_default(),
            );
        }
        rec.push(data.year(r).to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset_path(path: &Path, data: &Dataset) -> Result<()> {
    let file = File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    save_dataset(std::io::BufWriter::new(file), data)
}

/// Keeps rows without missing cells; returns the dropped count too.
pub fn complete_cases(data: &Dataset) -> (Dataset, usize) {
    let kept = data.filter(|r| !data.row_has_missing(r));
    let dropped = data.n_rows() - kept.n_rows();
    (kept, dropped)
}
