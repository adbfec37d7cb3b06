//! Dataset loaders: numeric CSV (header auto-detected) and IDX image/label
//! files, plus the deterministic train/test split.

use std::fs;
use std::path::Path;

use fusenet::network::Dataset;
use fusenet::numerics::{child_seed, Matrix, Rng};

use crate::{CliError, CliResult};

/// Loads a rectangular numeric CSV. A header row is detected by a non-numeric
/// cell in the first line. When `label_column` is given, that column is
/// parsed as nonnegative integer class labels and removed from the features.
pub fn load_csv(path: &Path, label_column: Option<usize>, id: usize) -> CliResult<Dataset> {
    let text = fs::read_to_string(path)
        .map_err(|err| CliError::Config(format!("cannot read {}: {err}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut width: Option<usize> = None;
    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = cells.iter().map(|c| c.parse::<f64>()).collect();
        let values = match parsed {
            Ok(values) => values,
            Err(_) if rows.is_empty() && width.is_none() => {
                // Non-numeric first row: header.
                width = Some(cells.len());
                continue;
            }
            Err(_) => {
                return Err(CliError::Config(format!(
                    "{}:{line_no}: non-numeric cell",
                    path.display()
                )));
            }
        };
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(CliError::Config(format!(
                    "{}:{line_no}: ragged row ({} cells, expected {w})",
                    path.display(),
                    values.len()
                )));
            }
            Some(_) => {}
        }
        if let Some(col) = label_column {
            if col >= values.len() {
                return Err(CliError::Config(format!(
                    "{}:{line_no}: label column {col} out of range for {} cells",
                    path.display(),
                    values.len()
                )));
            }
            let raw = values[col];
            if raw < 0.0 || raw.fract() != 0.0 {
                return Err(CliError::Config(format!(
                    "{}:{line_no}: label {raw} is not a nonnegative integer",
                    path.display()
                )));
            }
            labels.push(raw as usize);
            rows.push(
                values
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != col)
                    .map(|(_, v)| *v)
                    .collect(),
            );
        } else {
            rows.push(values);
        }
    }
    if rows.is_empty() {
        return Err(CliError::Config(format!("{}: no records", path.display())));
    }
    let features = Matrix::from_rows(&rows);
    Ok(Dataset::from_features(
        id,
        features,
        label_column.map(|_| labels),
    ))
}

fn read_be_u32(bytes: &[u8], offset: usize, what: &str) -> CliResult<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| CliError::Config(format!("truncated IDX file while reading {what}")))
}

/// Parses one IDX file of unsigned bytes, returning its dims and payload.
fn parse_idx(path: &Path) -> CliResult<(Vec<usize>, Vec<u8>)> {
    let bytes = fs::read(path)
        .map_err(|err| CliError::Config(format!("cannot read {}: {err}", path.display())))?;
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(CliError::Config(format!(
            "{}: bad IDX magic",
            path.display()
        )));
    }
    if bytes[2] != 0x08 {
        return Err(CliError::Config(format!(
            "{}: unsupported IDX dtype 0x{:02x} (only unsigned byte 0x08)",
            path.display(),
            bytes[2]
        )));
    }
    let ndim = bytes[3] as usize;
    if ndim == 0 {
        return Err(CliError::Config(format!(
            "{}: IDX file has zero dimensions",
            path.display()
        )));
    }
    let mut dims = Vec::with_capacity(ndim);
    for k in 0..ndim {
        dims.push(read_be_u32(&bytes, 4 + 4 * k, "dimension sizes")? as usize);
    }
    let header = 4 + 4 * ndim;
    let expected: usize = dims.iter().product();
    let payload = &bytes[header.min(bytes.len())..];
    if payload.len() < expected {
        return Err(CliError::Config(format!(
            "{}: truncated payload ({} bytes, expected {expected})",
            path.display(),
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(CliError::Config(format!(
            "{}: {} trailing bytes after payload",
            path.display(),
            payload.len() - expected
        )));
    }
    Ok((dims, payload.to_vec()))
}

/// Loads IDX images (and optional labels): pixels scaled to [0, 1], images
/// flattened to vectors.
pub fn load_idx(images_path: &Path, labels_path: Option<&Path>, id: usize) -> CliResult<Dataset> {
    let (dims, payload) = parse_idx(images_path)?;
    let count = dims[0];
    let record_dim: usize = dims[1..].iter().product::<usize>().max(1);
    if count == 0 {
        return Err(CliError::Config(format!(
            "{}: no records",
            images_path.display()
        )));
    }
    let mut features = Matrix::zeros(count, record_dim);
    for (k, &byte) in payload.iter().enumerate() {
        features.as_mut_slice()[k] = byte as f64 / 255.0;
    }
    let labels = match labels_path {
        None => None,
        Some(path) => {
            let (label_dims, label_payload) = parse_idx(path)?;
            if label_dims.len() != 1 {
                return Err(CliError::Config(format!(
                    "{}: label file must be one-dimensional",
                    path.display()
                )));
            }
            if label_dims[0] != count {
                return Err(CliError::Config(format!(
                    "{} labels for {count} images",
                    label_dims[0]
                )));
            }
            Some(label_payload.into_iter().map(|b| b as usize).collect())
        }
    };
    Ok(Dataset::from_features(id, features, labels))
}

/// Deterministic train/test split: a seeded shuffle of the record indices,
/// with the first `ceil(fraction * n)` going to the test side.
pub fn split_train_test(dataset: &mut Dataset, fraction: f64, seed: u64) {
    let n = dataset.n_records();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = Rng::new(child_seed(seed, 0x5000_0000 + dataset.id as u64));
    rng.shuffle(&mut order);
    let n_test = ((fraction * n as f64).ceil() as usize).min(n.saturating_sub(1));
    dataset.test_idx = order[..n_test].to_vec();
    dataset.train_idx = order[n_test..].to_vec();
    dataset.test_idx.sort_unstable();
    dataset.train_idx.sort_unstable();
}
