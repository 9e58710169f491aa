//! Verification records and their newline-delimited JSON form.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ModelTag;
use crate::grid::Area;
use crate::{Error, Result};

/// One (origin, lead time, area, model, threshold) forecast-outcome pair.
/// Metric values and PIT bins describe the whole area forecast and repeat
/// across the thresholds of the same area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    /// Forecast origin t_c.
    pub issue_time: i64,
    /// Valid time t_c + lead.
    pub timestamp: i64,
    pub lead_time_h: u32,
    pub area_id: usize,
    pub area: Area,
    pub model: ModelTag,
    pub threshold: f64,
    pub forecast_prob: f64,
    pub observed_outcome: u8,
    /// Training-window base rate for this threshold.
    pub climatology: f64,
    /// At least one observed gridpoint >= 0.1 mm.
    pub precip_subset: bool,
    pub n_members: usize,
    /// Origin at which the model in use was fitted.
    pub fit_time: i64,
    /// Latest timestamp in that model's training data.
    pub train_max_timestamp: i64,
    /// Observed metric values (defined ones only).
    pub metric_values: BTreeMap<String, f64>,
    /// Rank of the observation among the members, per metric.
    pub pit_bins: BTreeMap<String, usize>,
}

/// Member-quality ratios of one hill-climbed area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRecord {
    pub issue_time: i64,
    pub lead_time_h: u32,
    pub area_id: usize,
    pub ratios: Vec<f64>,
}

/// Buffered NDJSON writer.
pub struct NdjsonWriter {
    out: BufWriter<File>,
    path: String,
}

impl NdjsonWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            out: BufWriter::new(f),
            path: path.display().to_string(),
        })
    }

    pub fn push<T: Serialize>(&mut self, item: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, item)?;
        self.out.write_all(b"\n").map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_ndjson<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = NdjsonWriter::create(path)?;
    for it in items {
        w.push(it)?;
    }
    w.finish()
}

pub fn read_ndjson<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::format(path.display(), format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}
