//! Area precipitation and threshold-exceedance probabilities from ensembles.

use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::shuffle::SampleMatrix;
use crate::{Error, Result};

/// Hourly area-mean thresholds (mm).
pub const DEFAULT_THRESHOLDS: [f64; 4] = [0.62, 1.23, 2.47, 3.7];

/// Which area aggregate thresholds apply to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaStatistic {
    /// Total divided by the number of gridpoints.
    #[default]
    Mean,
    Total,
}

impl std::str::FromStr for AreaStatistic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "total" => Ok(Self::Total),
            _ => Err(Error::Config(format!("unknown area statistic '{s}' (expected mean or total)"))),
        }
    }
}

/// Member-wise sums over the gridpoint subset `s` of an m×K matrix.
pub fn area_totals(members: ArrayView2<'_, f64>, s: &[usize]) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Err(Error::InvalidInput("empty gridpoint subset".into()));
    }
    if let Some(&bad) = s.iter().find(|&&i| i >= members.nrows()) {
        return Err(Error::InvalidInput(format!(
            "gridpoint index {bad} out of range for {} rows",
            members.nrows()
        )));
    }
    Ok((0..members.ncols()).map(|j| s.iter().map(|&i| members[[i, j]]).sum()).collect())
}

/// Relative frequency of members strictly above `z`.
pub fn exceedance_prob(totals: &[f64], z: f64) -> Result<f64> {
    if totals.is_empty() {
        return Err(Error::InvalidInput("no members".into()));
    }
    Ok(totals.iter().filter(|&&t| t > z).count() as f64 / totals.len() as f64)
}

/// Aggregate per member plus exceedance probabilities per threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaPrediction {
    pub statistic: AreaStatistic,
    /// Member aggregates in the unit of `statistic`.
    pub values: Vec<f64>,
    /// (threshold, probability), in the order given.
    pub probabilities: Vec<(f64, f64)>,
}

impl AreaPrediction {
    /// Prediction over all gridpoints of `members`.
    pub fn new(members: &SampleMatrix, statistic: AreaStatistic, thresholds: &[f64]) -> Result<Self> {
        let all: Vec<usize> = (0..members.m()).collect();
        let mut values = area_totals(members.values(), &all)?;
        if statistic == AreaStatistic::Mean {
            for v in &mut values {
                *v /= all.len() as f64;
            }
        }
        let probabilities = thresholds
            .iter()
            .map(|&z| Ok((z, exceedance_prob(&values, z)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            statistic,
            values,
            probabilities,
        })
    }

    pub fn n_members(&self) -> usize {
        self.values.len()
    }
}

/// Area aggregate of one observed field slice (flattened).
pub fn observed_statistic(values: &[f64], statistic: AreaStatistic) -> f64 {
    let total: f64 = values.iter().sum();
    match statistic {
        AreaStatistic::Mean => total / values.len() as f64,
        AreaStatistic::Total => total,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub timestamp: i64,
    pub lead_time: u32,
    pub area_id: usize,
    pub threshold: f64,
    pub probability: f64,
    pub n_members: usize,
}

impl PredictionRow {
    pub fn from_prediction(p: &AreaPrediction, timestamp: i64, lead_time: u32, area_id: usize) -> Vec<Self> {
        p.probabilities
            .iter()
            .map(|&(threshold, probability)| Self {
                timestamp,
                lead_time,
                area_id,
                threshold,
                probability,
                n_members: p.n_members(),
            })
            .collect()
    }
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path.display(), e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::format(path.display(), e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path.display(), e.to_string()))?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format(path.display(), e.to_string()))
}
