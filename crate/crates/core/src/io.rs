//! File formats: parameter checkpoints, time-series CSVs and JSON reports.
//!
//! A checkpoint is one line of JSON (the header) terminated by `\n`,
//! followed by `d` little-endian `f64` values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::admm::IterateRecord;
use crate::error::{Error, Result};
use crate::plant::{NoiseRealization, Rollout};
use crate::stable_ops::{OperatorDims, ThetaVector};

pub const CHECKPOINT_FORMAT: &str = "admmpb-theta";
pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub layout_version: u32,
    pub dims: OperatorDims,
    pub kappa: f64,
    pub prescale: f64,
    pub seed: u64,
    pub len: usize,
}

impl CheckpointHeader {
    pub fn new(dims: OperatorDims, kappa: f64, prescale: f64, seed: u64) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            layout_version: LAYOUT_VERSION,
            dims,
            kappa,
            prescale,
            seed,
            len: dims.param_count(),
        }
    }
}

pub fn write_checkpoint<W: Write>(mut out: W, header: &CheckpointHeader, theta: &ThetaVector) -> Result<()> {
    if theta.dims() != header.dims || theta.len() != header.len {
        return Err(Error::mismatch("checkpoint length", header.len, theta.len()));
    }
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for v in theta.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<(CheckpointHeader, ThetaVector)> {
    let mut reader = BufReader::new(input);
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Checkpoint("missing header terminator".into()));
    }
    let header: CheckpointHeader = serde_json::from_slice(&line[..line.len() - 1])?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!("unknown format `{}`", header.format)));
    }
    if header.layout_version != LAYOUT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported layout version {}",
            header.layout_version
        )));
    }
    if header.len != header.dims.param_count() {
        return Err(Error::Checkpoint(format!(
            "header length {} does not match dims ({} parameters)",
            header.len,
            header.dims.param_count()
        )));
    }
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * header.len {
        return Err(Error::Checkpoint(format!(
            "expected {} payload bytes, found {}",
            8 * header.len,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let theta = ThetaVector::new(header.dims, values)?;
    Ok((header, theta))
}

pub fn save_checkpoint(path: &Path, header: &CheckpointHeader, theta: &ThetaVector) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), header, theta)
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, ThetaVector)> {
    read_checkpoint(File::open(path)?)
}

/// Columns `t, s, x1..xn, u1..um, w1..wn`.
pub fn write_trajectories<W: Write>(out: W, rollouts: &[Rollout], bank: &[NoiseRealization]) -> Result<()> {
    if rollouts.len() != bank.len() {
        return Err(Error::mismatch("noise realizations", rollouts.len(), bank.len()));
    }
    let mut w = csv::Writer::from_writer(out);
    let (n, m) = match rollouts.first() {
        Some(r) => (r.x.dim(), r.u.dim()),
        None => (0, 0),
    };
    let mut header = vec!["t".to_string(), "s".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.extend((1..=n).map(|i| format!("w{i}")));
    w.write_record(&header)?;
    for (r, noise) in rollouts.iter().zip(bank) {
        if noise.w.len() != r.x.len() || noise.dim() != n {
            return Err(Error::mismatch("noise length", r.x.len(), noise.w.len()));
        }
        for t in 0..r.x.len() {
            let mut rec = vec![t.to_string(), r.scenario.to_string()];
            rec.extend(r.x.row(t).iter().map(f64::to_string));
            rec.extend(r.u.row(t).iter().map(f64::to_string));
            rec.extend(noise.w.row(t).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `j, norm_r, norm_delta, eps_r, eps_delta, rho, eta, train_loss`.
pub fn write_iterate_log<W: Write>(out: W, log: &[IterateRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for rec in log {
        w.serialize(rec)?;
    }
    if log.is_empty() {
        w.write_record([
            "j",
            "norm_r",
            "norm_delta",
            "eps_r",
            "eps_delta",
            "rho",
            "eta",
            "train_loss",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_iterate_log<R: Read>(input: R) -> Result<Vec<IterateRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct TraceRow {
    epoch: usize,
    loss: f64,
}

/// Columns `epoch, loss`.
pub fn write_loss_trace<W: Write>(out: W, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if trace.is_empty() {
        w.write_record(["epoch", "loss"])?;
    }
    for (epoch, &loss) in trace.iter().enumerate() {
        w.serialize(TraceRow { epoch, loss })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_loss_trace<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<TraceRow>()
        .map(|row| row.map(|t| t.loss).map_err(Error::from))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn create_csv(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}
