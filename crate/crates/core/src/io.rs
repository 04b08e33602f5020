//! Comma-separated data files: one observation per row, an optional header
//! row, no missing values.
//!
//! The first row is a header when any of its fields fails to parse as a
//! number. Values are written in Rust's shortest round-trip notation, so a
//! written matrix reads back bit for bit.

use crate::error::{Error, Result};
use crate::numkernel::DataMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub data: DataMatrix,
}

fn split(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

pub fn read_csv(text: &str) -> Result<Table> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();
    let Some(&(_, first)) = lines.peek() else {
        return Err(Error::Parse("empty input".into()));
    };
    let fields = split(first);
    let header = if fields.iter().any(|f| f.parse::<f64>().is_err()) {
        lines.next();
        Some(fields.iter().map(|f| f.to_string()).collect::<Vec<_>>())
    } else {
        None
    };
    let m = fields.len();
    let mut values = Vec::new();
    let mut n = 0;
    for (lineno, line) in lines {
        let row = split(line);
        if row.len() != m {
            return Err(Error::Parse(format!(
                "line {}: {} fields, expected {m}",
                lineno + 1,
                row.len()
            )));
        }
        for (k, f) in row.iter().enumerate() {
            if f.is_empty() {
                return Err(Error::Parse(format!("line {}: missing value in column {}", lineno + 1, k + 1)));
            }
            let v: f64 = f
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: `{f}` is not a number", lineno + 1)))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("line {}: non-finite value `{f}`", lineno + 1)));
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Parse("no data rows".into()));
    }
    Ok(Table {
        header,
        data: DataMatrix::from_row_major(n, m, values)?,
    })
}

pub fn write_csv(data: &DataMatrix, header: Option<&[String]>) -> Result<String> {
    let mut out = String::new();
    if let Some(h) = header {
        if h.len() != data.ncols() {
            return Err(Error::InvalidData(format!(
                "{} header names for {} columns",
                h.len(),
                data.ncols()
            )));
        }
        if h.iter().all(|name| name.parse::<f64>().is_ok()) {
            return Err(Error::InvalidData("a numeric header would read back as data".into()));
        }
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for row in data.rows() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}
