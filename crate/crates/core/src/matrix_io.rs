//! CSV files for labelled matrices and plain tables.
//!
//! Intermediate files use [`format_exact`] so a stage that reads them sees
//! the same bits the writing stage held in memory.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::numfmt::format_exact;
use crate::{Error, Result};

/// A matrix with row and column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    /// Header of the label column.
    pub corner: String,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub values: DMatrix<f64>,
}

pub fn write_matrix<W: Write>(
    w: W,
    corner: &str,
    rows: &[String],
    columns: &[String],
    values: &DMatrix<f64>,
) -> Result<()> {
    if values.shape() != (rows.len(), columns.len()) {
        return Err(Error::InvalidInput(format!(
            "{}x{} matrix with {} row and {} column labels",
            values.nrows(),
            values.ncols(),
            rows.len(),
            columns.len()
        )));
    }
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e| Error::csv("<matrix writer>", e);
    wtr.write_record(std::iter::once(corner).chain(columns.iter().map(String::as_str)))
        .map_err(io)?;
    for (i, label) in rows.iter().enumerate() {
        let cells = values.row(i).iter().map(|&v| format_exact(v)).collect::<Vec<_>>();
        wtr.write_record(std::iter::once(label.as_str()).chain(cells.iter().map(String::as_str)))
            .map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io("<matrix writer>", e))
}

pub fn save_matrix(
    path: &Path,
    corner: &str,
    rows: &[String],
    columns: &[String],
    values: &DMatrix<f64>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_matrix(file, corner, rows, columns, values)
}

/// Opens a CSV produced by an earlier stage; absence is a
/// [`Error::MissingArtifact`].
pub fn open_artifact(path: &Path) -> Result<csv::Reader<File>> {
    if !path.is_file() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))
}

pub fn load_matrix(path: &Path) -> Result<LabeledMatrix> {
    let mut rdr = open_artifact(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let corner = headers.get(0).unwrap_or_default().to_string();
    let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut data = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map(|p| p.line());
        rows.push(record.get(0).unwrap_or_default().to_string());
        for cell in record.iter().skip(1) {
            data.push(parse_cell(cell, line)?);
        }
    }
    let values = DMatrix::from_row_slice(rows.len(), columns.len(), &data);
    Ok(LabeledMatrix {
        corner,
        rows,
        columns,
        values,
    })
}

/// Writes a header and string rows.
pub fn save_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(file);
    wtr.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        wtr.write_record(row).map_err(|e| Error::csv(path, e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// Header and rows of an artifact table, with the named columns required.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    pub fn load(path: &Path, required: &[&str]) -> Result<Table> {
        let mut rdr = open_artifact(path)?;
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::csv(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        for name in required {
            if !header.iter().any(|h| h == name) {
                return Err(Error::Schema(format!(
                    "{}: missing column '{name}'",
                    path.display()
                )));
            }
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::csv(path, e))?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record.iter().map(str::to_string).collect()));
        }
        Ok(Table { header, rows })
    }

    pub fn index(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).expect("column checked on load")
    }
}

pub fn parse_cell(cell: &str, line: Option<u64>) -> Result<f64> {
    cell.trim()
        .parse()
        .map_err(|_| Error::validation(line, format!("invalid number '{cell}'")))
}

/// Empty cells read as `None`.
pub fn parse_opt_cell(cell: &str, line: Option<u64>) -> Result<Option<f64>> {
    if cell.trim().is_empty() {
        Ok(None)
    } else {
        parse_cell(cell, line).map(Some)
    }
}

pub fn exact_opt(x: Option<f64>) -> String {
    x.map(format_exact).unwrap_or_default()
}
