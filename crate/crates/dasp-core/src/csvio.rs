//! Dense matrix CSV reading and writing.
//!
//! Values are written with 17 significant digits so matrices round-trip
//! exactly through text.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Format a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        // Keep integers readable.
        format!("{v:.1}")
    } else {
        format!("{v:.16e}")
    }
}

/// Write a dense matrix as row-major CSV.
pub fn write_matrix<W: Write>(w: &mut W, m: &DMatrix<f64>) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_matrix_file(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut buf = Vec::new();
    write_matrix(&mut buf, m).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    std::fs::write(path, buf).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(())
}

/// Read a numeric CSV into a dense matrix. `skip_header` drops the first
/// line. Rows must have equal length.
pub fn read_matrix<R: BufRead>(r: R, skip_header: bool) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidParameter(e.to_string()))?;
        if skip_header && lineno == 0 {
            continue;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = trimmed
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidParameter(format!(
                        "line {}: '{}' is not a number",
                        lineno + 1,
                        f.trim()
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::InvalidParameter(format!(
                    "line {}: expected {} columns, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidParameter("empty CSV".into()));
    }
    let (n, p) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

pub fn read_matrix_file(path: &Path, skip_header: bool) -> Result<DMatrix<f64>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    read_matrix(std::io::BufReader::new(file), skip_header)
}

/// Column of a matrix as a vector.
pub fn column(m: &DMatrix<f64>, j: usize) -> DVector<f64> {
    m.column(j).into_owned()
}
