//! CSV exchange format: header row, comma separated, `.` decimals, LF endings.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Reads a numeric CSV with a header row.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_matrix_from(file).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_matrix_from<R: Read>(reader: R) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let width = rdr.headers()?.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(Error::Parse(format!(
                "row {} has {} fields, expected {width}",
                line + 1,
                record.len()
            )));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: `{field}` is not a number", line + 1)))?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Parse("no data rows".into()));
    }
    Array2::from_shape_vec((rows, width), values).map_err(|e| Error::Parse(e.to_string()))
}

/// Default column names `x1..xd`.
pub fn default_header(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("{prefix}{j}")).collect()
}

pub fn write_matrix(path: &Path, header: &[String], m: ArrayView2<f64>) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_matrix_to(&mut file, header, m)
}

pub fn write_matrix_to<W: Write>(w: W, header: &[String], m: ArrayView2<f64>) -> Result<()> {
    if header.len() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{} header names for {} columns",
            header.len(),
            m.ncols()
        )));
    }
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    wtr.write_record(header)?;
    for row in m.rows() {
        wtr.write_record(row.iter().map(|v| format_f64(*v)))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes string records under `header` with the same CSV dialect as [`write_matrix`].
pub fn write_table<W, I>(w: W, header: &[&str], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = Vec<String>>,
{
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    wtr.write_record(header)?;
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::Dimension(format!(
                "row {i} has {} fields for {} columns",
                row.len(),
                header.len()
            )));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Shortest decimal that round-trips.
pub fn format_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}
