//! CSV ingestion and atomic result files.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, UoiError};

fn io_err(path: &Path, source: std::io::Error) -> UoiError {
    UoiError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> UoiError {
    UoiError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a dense numeric matrix. A first row containing any non-numeric cell
/// is taken as a header and skipped.
pub fn load_csv_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, (usize, String)> = record
            .iter()
            .enumerate()
            .map(|(c, cell)| cell.parse::<f64>().map_err(|_| (c, cell.to_string())))
            .collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if first => {
                first = false;
                continue;
            }
            Err((c, cell)) => {
                return Err(parse_err(
                    path,
                    line,
                    format!("column {}: `{cell}` is not a number", c + 1),
                ))
            }
        };
        first = false;
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(parse_err(path, line, format!("column {}: non-finite value", bad + 1)));
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected {w} fields, found {}", values.len()),
                ))
            }
            _ => {}
        }
        rows.push(values);
    }
    let Some(ncols) = width else {
        return Err(parse_err(path, 0, "no numeric rows"));
    };
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

/// Reads a vector stored either as one column or as one row.
pub fn load_csv_vector(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    let path = path.as_ref();
    let m = load_csv_matrix(path)?;
    match m.shape() {
        (_, 1) => Ok(m.column(0).clone_owned()),
        (1, _) => Ok(m.row(0).transpose()),
        (r, c) => Err(parse_err(
            path,
            0,
            format!("expected a single row or column, found {r}x{c}"),
        )),
    }
}

/// Shortest decimal text that parses back to the identical value.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format_f64(m[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    write_atomic(path, matrix_to_csv(m).as_bytes())
}

pub fn write_csv_vector(path: impl AsRef<Path>, v: &DVector<f64>) -> Result<()> {
    let text: String = v.iter().map(|x| format_f64(*x) + "\n").collect();
    write_atomic(path, text.as_bytes())
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}
