//! Chain records (JSON lines), per-iteration metrics (CSV) and run metadata.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PscError, Result};
use crate::geometry::OrthonormalFrame;
use crate::model::{Atom, MixingMeasure, ModelState, NoiseScales};

/// Serde adapter writing a matrix as an array of rows.
pub mod rows {
    use nalgebra::DMatrix;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(mat: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = mat.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

/// One stored draw. `u` is the `m x k` frame in column-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainRecord {
    pub iter: usize,
    pub k: usize,
    #[serde(rename = "U")]
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma0: f64,
    pub sigma: Vec<f64>,
    pub weights: Vec<f64>,
    pub atoms: Vec<AtomRecord>,
    pub log_joint: f64,
}

impl ChainRecord {
    pub fn from_state(iter: usize, state: &ModelState, log_joint: f64) -> Self {
        Self {
            iter,
            k: state.k(),
            u: state.frame().as_matrix().as_slice().to_vec(),
            theta: state.theta().as_slice().to_vec(),
            sigma0: state.scales().sigma0,
            sigma: state.scales().sigma.as_slice().to_vec(),
            weights: state.mixing().weights().as_slice().to_vec(),
            atoms: state
                .mixing()
                .atoms()
                .iter()
                .map(|a| AtomRecord {
                    mu: a.mu.as_slice().to_vec(),
                    nu: a.nu.as_slice().to_vec(),
                })
                .collect(),
            log_joint,
        }
    }

    pub fn to_state(&self) -> Result<ModelState> {
        let m = self.theta.len();
        if self.u.len() != m * self.k {
            return Err(PscError::DimensionMismatch {
                expected: m * self.k,
                actual: self.u.len(),
                context: "chain record frame",
            });
        }
        let frame = OrthonormalFrame::new(DMatrix::from_column_slice(m, self.k, &self.u))?;
        let scales = NoiseScales::new(self.sigma0, DVector::from_column_slice(&self.sigma))?;
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom::new(DVector::from_column_slice(&a.mu), DVector::from_column_slice(&a.nu)))
            .collect::<Result<Vec<_>>>()?;
        let mixing = MixingMeasure::new(DVector::from_column_slice(&self.weights), atoms)?;
        ModelState::from_theta(frame, DVector::from_column_slice(&self.theta), scales, mixing)
    }
}

pub fn write_chain(path: &Path, records: &[ChainRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_chain(path: &Path) -> Result<Vec<ChainRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (row, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| PscError::MalformedRow {
            path: path.to_path_buf(),
            row: row + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub k: usize,
    pub iter: usize,
    pub log_joint: f64,
    pub sigma0: f64,
    pub occupied_atoms: usize,
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<_>, _>>()?)
}

/// Provenance of a run: seed, hashes of the configuration and dataset, wall-clock times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub config_sha256: String,
    pub dataset_sha256: String,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub version: String,
}

impl RunMetadata {
    pub fn start(seed: u64, config_sha256: String, dataset_sha256: String) -> Self {
        Self {
            seed,
            config_sha256,
            dataset_sha256,
            started_unix: unix_now(),
            finished_unix: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix = Some(unix_now());
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Hash of a serializable value's canonical JSON.
pub fn sha256_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
