//! File formats and atomic output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ShapeBuilder};
use segreg::Dataset;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Dataset read from CSV, with the digest of the raw bytes.
pub struct LoadedData {
    pub data: Dataset,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))
}

/// Parses a CSV with a header row, the response first and covariates after.
/// With `order_by`, rows are stably sorted by that column, which is then
/// dropped.
pub fn parse_dataset(bytes: &[u8], order_by: Option<&str>, center: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Parse(format!("bad header: {e}")))?
        .clone();
    let order_col = match order_by {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| CliError::Parse(format!("no column named {name:?}")))?,
        ),
        None => None,
    };
    let width = headers.len();
    let kept = width - usize::from(order_col.is_some());
    if kept < 2 {
        return Err(CliError::Parse(format!(
            "need a response and at least one covariate, found {kept} columns"
        )));
    }

    let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        // line 1 is the header
        let record = record.map_err(|e| CliError::Parse(format!("row {}: {e}", line + 2)))?;
        let mut key = 0.0;
        let mut values = Vec::with_capacity(kept);
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::Parse(format!("row {}, column {}: not a number: {field:?}", line + 2, col + 1))
            })?;
            if !v.is_finite() {
                return Err(CliError::Parse(format!(
                    "row {}, column {}: non-finite value",
                    line + 2,
                    col + 1
                )));
            }
            if Some(col) == order_col {
                key = v;
            } else {
                values.push(v);
            }
        }
        rows.push((key, values));
    }
    if order_col.is_some() {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let n = rows.len();
    let p = kept - 1;
    let mut y = Vec::with_capacity(n);
    let mut x = Array2::zeros((n, p).f());
    for (i, (_, values)) in rows.iter().enumerate() {
        y.push(values[0]);
        for (j, &v) in values[1..].iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    let data = Dataset::new(y, x).map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(if center { data.centered() } else { data })
}

pub fn load_dataset(path: &Path, order_by: Option<&str>, center: bool) -> Result<LoadedData> {
    let bytes = read_input(path)?;
    let data = parse_dataset(&bytes, order_by, center)?;
    Ok(LoadedData {
        data,
        sha256: sha256_hex(&bytes),
    })
}

/// CSV text with header `y,x1,..,xp`. Numbers use the shortest
/// representation that parses back to the same value.
pub fn dataset_csv(data: &Dataset) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["y".to_string()];
    header.extend((1..=data.p()).map(|j| format!("x{j}")));
    writer.write_record(&header).map_err(csv_write_error)?;
    let mut record = Vec::with_capacity(data.p() + 1);
    for i in 0..data.n() {
        record.clear();
        record.push(data.y()[i].to_string());
        record.extend(data.row(i).iter().map(f64::to_string));
        writer.write_record(&record).map_err(csv_write_error)?;
    }
    writer.into_inner().map_err(|e| csv_write_error(e.into_error().into()))
}

fn csv_write_error(e: csv::Error) -> CliError {
    CliError::Write {
        path: PathBuf::from("<memory>"),
        source: std::io::Error::other(e),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("output types serialize");
    out.push(b'\n');
    out
}

/// `<path><suffix>`, e.g. `out.csv` -> `out.csv.manifest.json`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Files to be written together. Nothing touches the destination paths
/// until every file has been staged in a temporary file next to it.
#[derive(Default)]
pub struct OutputSet {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((path.into(), bytes));
    }

    pub fn commit(self) -> Result<()> {
        let mut staged = Vec::with_capacity(self.files.len());
        for (path, bytes) in self.files {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
                _ => PathBuf::from("."),
            };
            let write_err = |source| CliError::Write {
                path: path.clone(),
                source,
            };
            let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(write_err)?;
            tmp.write_all(&bytes).map_err(write_err)?;
            tmp.flush().map_err(write_err)?;
            staged.push((path, tmp));
        }
        for (path, tmp) in staged {
            tmp.persist(&path).map_err(|e| CliError::Write { path, source: e.error })?;
        }
        Ok(())
    }
}
