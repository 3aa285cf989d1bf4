use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::problem::fmt_f64;

/// Column order of the records CSV.
pub const COLUMNS: [&str; 26] = [
    "n_total",
    "m",
    "requested_beta",
    "dim",
    "gamma",
    "zeta",
    "source_norm",
    "noise_sd",
    "algorithm",
    "regime",
    "filter",
    "batch_size",
    "iterations",
    "step_size",
    "lambda",
    "scale",
    "replications",
    "base_seed",
    "risk_mean",
    "risk_se",
    "risk_method",
    "step_clamped",
    "partition_warning",
    "wall_ms",
    "version",
    "error",
];

/// One sweep point aggregated over its replications.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub n_total: usize,
    pub m: usize,
    pub requested_beta: Option<f64>,
    pub dim: usize,
    pub gamma: f64,
    pub zeta: f64,
    pub source_norm: f64,
    pub noise_sd: f64,
    pub algorithm: String,
    pub regime: String,
    pub filter: String,
    pub batch_size: Option<usize>,
    pub iterations: Option<usize>,
    pub step_size: Option<f64>,
    pub lambda: Option<f64>,
    pub scale: f64,
    pub replications: usize,
    pub base_seed: u64,
    pub risk_mean: f64,
    pub risk_se: f64,
    pub risk_method: String,
    pub step_clamped: bool,
    pub partition_warning: bool,
    pub wall_ms: u64,
    pub version: String,
    pub error: Option<String>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_f(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl RunRecord {
    fn fields(&self) -> Vec<String> {
        vec![
            self.n_total.to_string(),
            self.m.to_string(),
            opt_f(self.requested_beta),
            self.dim.to_string(),
            fmt_f64(self.gamma),
            fmt_f64(self.zeta),
            fmt_f64(self.source_norm),
            fmt_f64(self.noise_sd),
            self.algorithm.clone(),
            self.regime.clone(),
            self.filter.clone(),
            opt(self.batch_size),
            opt(self.iterations),
            opt_f(self.step_size),
            opt_f(self.lambda),
            fmt_f64(self.scale),
            self.replications.to_string(),
            self.base_seed.to_string(),
            fmt_f64(self.risk_mean),
            fmt_f64(self.risk_se),
            self.risk_method.clone(),
            self.step_clamped.to_string(),
            self.partition_warning.to_string(),
            self.wall_ms.to_string(),
            self.version.clone(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

pub fn write_records<W: Write>(records: &[RunRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(COLUMNS)?;
    for r in records {
        out.write_record(r.fields())?;
    }
    out.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(row: &HashMap<&str, &str>, key: &str) -> Result<T> {
    let v = row.get(key).ok_or_else(|| Error::Format(format!("missing column `{key}`")))?;
    v.parse().map_err(|_| Error::Format(format!("bad value `{v}` in column `{key}`")))
}

fn parse_opt<T: std::str::FromStr>(row: &HashMap<&str, &str>, key: &str) -> Result<Option<T>> {
    match row.get(key) {
        Some(v) if !v.is_empty() => parse(row, key).map(Some),
        _ => Ok(None),
    }
}

fn text(row: &HashMap<&str, &str>, key: &str) -> String {
    row.get(key).map(|s| s.to_string()).unwrap_or_default()
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let map: HashMap<&str, &str> = headers.iter().zip(row.iter()).collect();
        let error = text(&map, "error");
        out.push(RunRecord {
            n_total: parse(&map, "n_total")?,
            m: parse(&map, "m")?,
            requested_beta: parse_opt(&map, "requested_beta")?,
            dim: parse(&map, "dim")?,
            gamma: parse(&map, "gamma")?,
            zeta: parse(&map, "zeta")?,
            source_norm: parse(&map, "source_norm")?,
            noise_sd: parse(&map, "noise_sd")?,
            algorithm: text(&map, "algorithm"),
            regime: text(&map, "regime"),
            filter: text(&map, "filter"),
            batch_size: parse_opt(&map, "batch_size")?,
            iterations: parse_opt(&map, "iterations")?,
            step_size: parse_opt(&map, "step_size")?,
            lambda: parse_opt(&map, "lambda")?,
            scale: parse(&map, "scale")?,
            replications: parse(&map, "replications")?,
            base_seed: parse(&map, "base_seed")?,
            risk_mean: parse(&map, "risk_mean")?,
            risk_se: parse(&map, "risk_se")?,
            risk_method: text(&map, "risk_method"),
            step_clamped: parse(&map, "step_clamped")?,
            partition_warning: parse(&map, "partition_warning")?,
            wall_ms: parse(&map, "wall_ms")?,
            version: text(&map, "version"),
            error: if error.is_empty() { None } else { Some(error) },
        });
    }
    Ok(out)
}
