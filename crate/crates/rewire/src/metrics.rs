//! Append-only metrics persistence: delimiter-separated text with a header
//! row, one file per run, flushed per record so partial results survive an
//! abort.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// One training-loop observation.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub iteration: usize,
    pub epoch: usize,
    pub train_loss: f64,
    /// Recorded at epoch ends; empty otherwise.
    pub test_accuracy: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub connectivity: f64,
    pub layer_connectivity: Vec<f64>,
    /// Newly activated connections per layer since the previous record.
    pub newly_activated: Vec<usize>,
    pub wall_ms: Option<u64>,
}

/// Per-epoch-pair correlation observation for the task-swap experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationRecord {
    pub epoch_from: usize,
    pub epoch_to: usize,
    pub weight_correlation: Vec<f64>,
    pub activity_correlation: Vec<f64>,
}

fn fmt_f64(x: f64) -> String {
    // shortest representation that round-trips
    format!("{x}")
}

pub struct MetricsWriter {
    out: BufWriter<File>,
    n_layers: usize,
    wall_time: bool,
    last_iteration: Option<usize>,
}

impl MetricsWriter {
    /// Create the file and write a provenance comment (per-layer connection
    /// counts, needed downstream for relative rewiring rates) plus the
    /// header row.
    pub fn create(path: &Path, layer_m: &[usize], wall_time: bool) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        let ms: Vec<String> = layer_m.iter().map(|m| m.to_string()).collect();
        writeln!(out, "# layer_m = {}", ms.join(","))?;
        let mut header = String::from("iteration,epoch,train_loss,test_accuracy,train_accuracy,connectivity");
        for l in 0..layer_m.len() {
            let _ = write!(header, ",conn_l{l}");
        }
        for l in 0..layer_m.len() {
            let _ = write!(header, ",k_new_l{l}");
        }
        if wall_time {
            header.push_str(",wall_ms");
        }
        writeln!(out, "{header}")?;
        out.flush()?;
        Ok(MetricsWriter {
            out,
            n_layers: layer_m.len(),
            wall_time,
            last_iteration: None,
        })
    }

    pub fn append(&mut self, r: &MetricsRecord) -> Result<()> {
        if r.layer_connectivity.len() != self.n_layers
            || r.newly_activated.len() != self.n_layers
        {
            return Err(Error::Contract("record layer count mismatch".into()));
        }
        if let Some(last) = self.last_iteration {
            if r.iteration < last {
                return Err(Error::Contract(format!(
                    "iteration {} after {last}",
                    r.iteration
                )));
            }
        }
        self.last_iteration = Some(r.iteration);
        let mut line = format!(
            "{},{},{},{},{},{}",
            r.iteration,
            r.epoch,
            fmt_f64(r.train_loss),
            r.test_accuracy.map(fmt_f64).unwrap_or_default(),
            r.train_accuracy.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.connectivity),
        );
        for c in &r.layer_connectivity {
            let _ = write!(line, ",{}", fmt_f64(*c));
        }
        for k in &r.newly_activated {
            let _ = write!(line, ",{k}");
        }
        if self.wall_time {
            let _ = write!(line, ",{}", r.wall_ms.unwrap_or(0));
        }
        writeln!(self.out, "{line}")?;
        self.out.flush()?;
        Ok(())
    }
}

pub struct CorrelationWriter {
    out: BufWriter<File>,
    n_layers: usize,
}

impl CorrelationWriter {
    pub fn create(path: &Path, n_layers: usize) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        let mut header = String::from("epoch_from,epoch_to");
        for l in 0..n_layers {
            let _ = write!(header, ",weight_corr_l{l}");
        }
        for l in 0..n_layers {
            let _ = write!(header, ",activity_corr_l{l}");
        }
        writeln!(out, "{header}")?;
        out.flush()?;
        Ok(CorrelationWriter { out, n_layers })
    }

    pub fn append(&mut self, r: &CorrelationRecord) -> Result<()> {
        if r.weight_correlation.len() != self.n_layers
            || r.activity_correlation.len() != self.n_layers
        {
            return Err(Error::Contract("correlation layer count mismatch".into()));
        }
        for c in r.weight_correlation.iter().chain(&r.activity_correlation) {
            if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(c) {
                return Err(Error::Contract(format!("correlation {c} outside [-1, 1]")));
            }
        }
        let mut line = format!("{},{}", r.epoch_from, r.epoch_to);
        for c in r.weight_correlation.iter().chain(&r.activity_correlation) {
            let _ = write!(line, ",{}", fmt_f64(*c));
        }
        writeln!(self.out, "{line}")?;
        self.out.flush()?;
        Ok(())
    }
}

/// A parsed metrics (or correlation, or sweep) table.
#[derive(Clone, Debug)]
pub struct Table {
    pub layer_m: Vec<usize>,
    pub columns: Vec<String>,
    /// Row-major cells; empty cells parse as NaN.
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Format {
                field: format!("column '{name}'"),
                message: format!("not in schema [{}]", self.columns.join(", ")),
            })?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c == name)
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)?;
    let mut layer_m = Vec::new();
    let mut columns = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# layer_m =") {
            layer_m = rest
                .trim()
                .split(',')
                .map(|x| {
                    x.trim().parse().map_err(|_| Error::Format {
                        field: "layer_m".into(),
                        message: format!("bad count '{x}'"),
                    })
                })
                .collect::<Result<_>>()?;
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if columns.is_empty() {
            columns = line.split(',').map(|s| s.to_string()).collect();
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|c| {
                if c.is_empty() {
                    Ok(f64::NAN)
                } else {
                    c.parse().map_err(|_| Error::Format {
                        field: "metrics cell".into(),
                        message: format!("bad number '{c}'"),
                    })
                }
            })
            .collect::<Result<_>>()?;
        if row.len() != columns.len() {
            return Err(Error::Format {
                field: "metrics row".into(),
                message: format!("{} cells for {} columns", row.len(), columns.len()),
            });
        }
        rows.push(row);
    }
    Ok(Table {
        layer_m,
        columns,
        rows,
    })
}

/// Boxcar (moving-average) smoothing with a centered window of `width`
/// samples, truncated at the edges.
pub fn boxcar(xs: &[f64], width: usize) -> Vec<f64> {
    assert!(width >= 1);
    let n = xs.len();
    let half = width / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + width - half).min(n);
            xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}
