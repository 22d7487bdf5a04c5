use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

/// Twelve significant digits, exponent form.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(std::io::Error::from)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}
