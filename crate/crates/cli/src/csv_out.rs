use std::io;
use std::path::Path;

use semilab::C64;

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Real(String, Vec<f64>),
    /// Written as `<name>_re`, `<name>_im`.
    Complex(String, Vec<C64>),
    Text(String, Vec<String>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Real(_, v) => v.len(),
            Column::Complex(_, v) => v.len(),
            Column::Text(_, v) => v.len(),
        }
    }

    fn headers(&self, out: &mut Vec<String>) {
        match self {
            Column::Real(n, _) | Column::Text(n, _) => out.push(n.clone()),
            Column::Complex(n, _) => {
                out.push(format!("{n}_re"));
                out.push(format!("{n}_im"));
            }
        }
    }

    fn cells(&self, row: usize, out: &mut Vec<String>) {
        match self {
            Column::Real(_, v) => out.push(format_float(v[row])),
            Column::Complex(_, v) => {
                out.push(format_float(v[row].re));
                out.push(format_float(v[row].im));
            }
            Column::Text(_, v) => out.push(v[row].clone()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Series {
    pub columns: Vec<Column>,
}

impl Series {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn real(mut self, name: &str, values: Vec<f64>) -> Self {
        self.columns.push(Column::Real(name.into(), values));
        self
    }

    pub fn complex(mut self, name: &str, values: Vec<C64>) -> Self {
        self.columns.push(Column::Complex(name.into(), values));
        self
    }

    pub fn text(mut self, name: &str, values: Vec<String>) -> Self {
        self.columns.push(Column::Text(name.into(), values));
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }
}

/// Shortest decimal that parses back to the same `f64` (at most 17
/// significant digits).
pub fn format_float(x: f64) -> String {
    let s = format!("{x:?}");
    match s.strip_suffix(".0") {
        Some(int) if !int.contains('e') => int.to_string(),
        _ => s,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("series is not rectangular: column `{column}` has {len} rows, expected {expected}")]
    Ragged {
        column: String,
        len: usize,
        expected: usize,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn emit_csv(series: &Series, path: &Path) -> Result<(), CsvError> {
    let rows = series.rows();
    for c in &series.columns {
        if c.len() != rows {
            let mut h = Vec::new();
            c.headers(&mut h);
            return Err(CsvError::Ragged {
                column: h.remove(0),
                len: c.len(),
                expected: rows,
            });
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = Vec::new();
    for c in &series.columns {
        c.headers(&mut header);
    }
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for r in 0..rows {
        record.clear();
        for c in &series.columns {
            c.cells(r, &mut record);
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
