//! Minimal CSV reading/writing for the CLI's own artifacts. Every data cell
//! is a float printed as `{:.16e}` so files round-trip losslessly.

use std::path::Path;

use kcq::dynamics::QoISpec;
use kcq::measurement::{MeasurementModel, MeasurementSet};
use kcq::{Error, Result};
use nalgebra::DMatrix;

/// An all-numeric table with a named header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Corruption(format!("CSV has no column '{name}'")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    let mut out = table.header.join(",");
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Corruption(format!("{} is empty", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim().parse().map_err(|_| {
                    Error::Corruption(format!(
                        "{} row {}: non-numeric cell '{cell}'",
                        path.display(),
                        ln + 2
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != header.len() {
            return Err(Error::Corruption(format!(
                "{} row {}: {} cells, header has {}",
                path.display(),
                ln + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Writes a measurement record as `step,time,<sensor_0 label>,...`.
pub fn write_measurements(path: &Path, meas: &MeasurementSet, times: &[f64]) -> Result<()> {
    let mut header = vec!["step".to_string(), "time".to_string()];
    for spec in &meas.model.points {
        header.push(spec.label());
    }
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for i in 1..=meas.max_step() {
        let mut row = vec![i as f64, times[i]];
        for j in 0..meas.model.n_points() {
            row.push(meas.value(i, j));
        }
        table.push(row);
    }
    write_table(path, &table)
}

/// Reads a measurement CSV back into a measurement set. The CSV does not
/// carry the noise model, so means and standard deviations are supplied by
/// the caller (one per sensor column).
pub fn read_measurements(
    path: &Path,
    noise_mean: Vec<f64>,
    noise_sd: Vec<f64>,
) -> Result<MeasurementSet> {
    let table = read_table(path)?;
    if table.header.len() < 3 || table.header[0] != "step" || table.header[1] != "time" {
        return Err(Error::Config(format!(
            "{}: expected header 'step,time,<sensor>,...'",
            path.display()
        )));
    }
    let points: Vec<QoISpec> = table.header[2..]
        .iter()
        .map(|l| QoISpec::parse(l))
        .collect::<Result<_>>()?;
    let model = MeasurementModel::new(points, noise_mean, noise_sd)?;
    let n_rows = table.rows.len();
    let mut values = DMatrix::zeros(n_rows, model.n_points());
    for (i, row) in table.rows.iter().enumerate() {
        if row[0] != (i + 1) as f64 {
            return Err(Error::Config(format!(
                "{}: steps must run 1..{} without gaps",
                path.display(),
                n_rows
            )));
        }
        for j in 0..model.n_points() {
            values[(i, j)] = row[2 + j];
        }
    }
    Ok(MeasurementSet { values, model })
}
