//! Trajectory CSV and run manifests.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{PwsError, Result};
use crate::integrate::Trajectory;
use crate::model::RegionId;

pub const SCHEMA_VERSION: u32 = 1;

/// Scientific notation with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_header(dim: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=dim).map(|i| format!("x{i}")));
    cols.extend(["region", "h1", "h2", "hnorm"].map(String::from));
    cols.join(",")
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    writeln!(out, "{}", csv_header(traj.dim)).map_err(io_err)?;
    for k in 0..traj.len() {
        let mut line = fmt_num(traj.times[k]);
        for v in traj.state(k) {
            line.push(',');
            line.push_str(&fmt_num(*v));
        }
        line.push(',');
        line.push_str(traj.regions[k].label());
        for v in [traj.h1[k], traj.h2[k], traj.hnorm[k]] {
            line.push(',');
            line.push_str(&fmt_num(v));
        }
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_trajectory_csv<R: BufRead>(input: R) -> Result<Trajectory> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| PwsError::InvalidInput("empty CSV".into()))?
        .map_err(io_err)?;
    let cols = header.split(',').count();
    if cols < 6 {
        return Err(PwsError::InvalidInput(format!("unexpected CSV header: {header}")));
    }
    let dim = cols - 5;
    if header != csv_header(dim) {
        return Err(PwsError::InvalidInput(format!("unexpected CSV header: {header}")));
    }
    let mut traj = Trajectory::new(dim);
    let mut x = vec![0.0; dim];
    for (row, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(PwsError::InvalidInput(format!("row {} has {} fields, expected {cols}", row + 2, fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| PwsError::InvalidInput(format!("row {}: {e}: {s:?}", row + 2)));
        let t = num(fields[0])?;
        for i in 0..dim {
            x[i] = num(fields[1 + i])?;
        }
        let region: RegionId = fields[1 + dim].parse()?;
        let h = (num(fields[2 + dim])?, num(fields[3 + dim])?);
        traj.push(t, &x, region, h);
    }
    Ok(traj)
}

fn io_err(e: std::io::Error) -> PwsError {
    PwsError::InvalidInput(format!("I/O error: {e}"))
}

/// Written next to every output; `argv` re-runs the command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub command: String,
    pub preset: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub outputs: Vec<String>,
    pub argv: Vec<String>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, preset: &str, argv: Vec<String>) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            command: command.into(),
            preset: preset.into(),
            parameters: BTreeMap::new(),
            seed: None,
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            outputs: Vec::new(),
            argv,
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.parameters.insert(key.into(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
        self
    }
}
