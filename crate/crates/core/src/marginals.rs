//! Discrete empirical marginals, PIT pairs and stratified sampling from
//! quantile forecasts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Default discretization step in mm.
pub const DEFAULT_RESOLUTION: f64 = 0.01;

/// Right-continuous step CDF on a discrete support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarginalRepr")]
pub struct MarginalCdf {
    support: Vec<f64>,
    cdf: Vec<f64>,
    resolution: f64,
    /// Support values as integer multiples of `resolution`.
    #[serde(skip)]
    steps: Vec<i64>,
}

/// The pair (G(y), G(y-)) of a discrete observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitPair {
    pub u: f64,
    pub u_minus: f64,
}

impl PitPair {
    /// Requires `0 <= u_minus < u <= 1`.
    pub fn new(u: f64, u_minus: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&u_minus) || !(u_minus < u && u <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "invalid PIT pair (u={u}, u_minus={u_minus}); need 0 <= u_minus < u <= 1"
            )));
        }
        Ok(Self { u, u_minus })
    }

    /// Probability mass of the atom.
    pub fn mass(&self) -> f64 {
        self.u - self.u_minus
    }
}

fn round_steps(y: f64, resolution: f64) -> i64 {
    // Round half up.
    (y / resolution + 0.5).floor() as i64
}

fn step_value(step: i64, resolution: f64) -> f64 {
    let inv = 1.0 / resolution;
    if (inv - inv.round()).abs() < 1e-9 {
        step as f64 / inv.round()
    } else {
        step as f64 * resolution
    }
}

impl MarginalCdf {
    /// Empirical CDF with plotting position `count / (k + 1)`.
    pub fn fit(samples: &[f64], resolution: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        check_resolution(resolution)?;
        if let Some((i, v)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!("sample {i} is {v}; values must be finite and >= 0")));
        }
        let mut steps: Vec<i64> = samples.iter().map(|&y| round_steps(y, resolution)).collect();
        steps.sort_unstable();
        let denom = (samples.len() + 1) as f64;
        let mut support_steps = Vec::new();
        let mut cdf = Vec::new();
        for (i, s) in steps.iter().enumerate() {
            if i + 1 == steps.len() || steps[i + 1] != *s {
                support_steps.push(*s);
                cdf.push((i + 1) as f64 / denom);
            }
        }
        Ok(Self {
            support: support_steps.iter().map(|&s| step_value(s, resolution)).collect(),
            cdf,
            resolution,
            steps: support_steps,
        })
    }

    /// Builds a CDF from explicit parts. The last value may equal 1, which
    /// gives a complete distribution (used by exact enumeration checks).
    pub fn from_parts(support: Vec<f64>, cdf: Vec<f64>, resolution: f64) -> Result<Self> {
        check_resolution(resolution)?;
        if support.is_empty() || support.len() != cdf.len() {
            return Err(Error::InvalidInput(format!(
                "support ({}) and cdf ({}) must be non-empty and equally long",
                support.len(),
                cdf.len()
            )));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) || support[0] < 0.0 {
            return Err(Error::InvalidInput("support must be non-negative and strictly increasing".into()));
        }
        if cdf.windows(2).any(|w| w[0] >= w[1]) || cdf[0] <= 0.0 || cdf[cdf.len() - 1] > 1.0 {
            return Err(Error::InvalidInput("cdf must be strictly increasing within (0, 1]".into()));
        }
        let steps: Vec<i64> = support.iter().map(|&y| round_steps(y, resolution)).collect();
        if steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("support values collide at this resolution".into()));
        }
        Ok(Self {
            support,
            cdf,
            resolution,
            steps,
        })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// PIT pair of the support atom at `idx`.
    pub fn pit_at(&self, idx: usize) -> PitPair {
        PitPair {
            u: self.cdf[idx],
            u_minus: if idx == 0 { 0.0 } else { self.cdf[idx - 1] },
        }
    }

    /// Index of the support value nearest to `y` after rounding (ties to
    /// the lower value). Values outside the support snap to its ends.
    pub fn snap_index(&self, y: f64) -> usize {
        let s = if y.is_nan() { i64::MIN } else { round_steps(y, self.resolution) };
        let hi = self.steps.partition_point(|&v| v < s);
        if hi == 0 {
            0
        } else if hi == self.steps.len() {
            hi - 1
        } else if self.steps[hi] == s {
            hi
        } else {
            let lo = hi - 1;
            if s - self.steps[lo] <= self.steps[hi] - s {
                lo
            } else {
                hi
            }
        }
    }

    /// (G(y), G(y-)) with `y` rounded and snapped onto the support.
    pub fn pit(&self, y: f64) -> PitPair {
        self.pit_at(self.snap_index(y))
    }

    /// Smallest support value whose CDF is at least `u` (the top atom when
    /// `u` exceeds the defective upper mass).
    pub fn quantile(&self, u: f64) -> f64 {
        let idx = self.cdf.partition_point(|&c| c < u);
        self.support[idx.min(self.support.len() - 1)]
    }
}

#[derive(Deserialize)]
struct MarginalRepr {
    support: Vec<f64>,
    cdf: Vec<f64>,
    resolution: f64,
}

impl TryFrom<MarginalRepr> for MarginalCdf {
    type Error = Error;
    fn try_from(r: MarginalRepr) -> Result<Self> {
        Self::from_parts(r.support, r.cdf, r.resolution)
    }
}

fn check_resolution(resolution: f64) -> Result<()> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::InvalidInput(format!("resolution must be positive, got {resolution}")));
    }
    Ok(())
}

/// Picks one element uniformly from each of `n` consecutive groups of `q`.
pub fn stratified_sample<R: Rng + ?Sized>(q: &[f64], n: usize, rng: &mut R) -> Result<Vec<f64>> {
    stratified_sample_with(q, n, |g| rng.random_range(0..g))
}

/// Like [`stratified_sample`] with an explicit within-group index chooser.
pub fn stratified_sample_with<F: FnMut(usize) -> usize>(q: &[f64], n: usize, mut pick: F) -> Result<Vec<f64>> {
    if n == 0 || q.is_empty() || q.len() % n != 0 {
        return Err(Error::InvalidInput(format!(
            "member count {n} does not divide the quantile count {}",
            q.len()
        )));
    }
    let g = q.len() / n;
    Ok((0..n)
        .map(|j| {
            let k = pick(g);
            assert!(k < g, "group index {k} out of range 0..{g}");
            q[j * g + k]
        })
        .collect())
}

/// Per-gridpoint quantile forecasts for one window, valid time and lead time.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileForecast {
    pub spec: GridSpec,
    pub timestamp: i64,
    pub lead_time_h: u32,
    pub alpha_min: f64,
    pub alpha_max: f64,
    n_quantiles: usize,
    /// Row-major over gridpoints, `n_quantiles` values each.
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct QuantileSidecar {
    n_rows: usize,
    n_cols: usize,
    timestamp: i64,
    lead_time_h: u32,
    alpha_min: f64,
    alpha_max: f64,
}

impl QuantileForecast {
    pub fn new(
        spec: GridSpec,
        timestamp: i64,
        lead_time_h: u32,
        n_quantiles: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if n_quantiles == 0 || values.len() != spec.n_cells() * n_quantiles {
            return Err(Error::DimensionMismatch {
                expected: spec.n_cells() * n_quantiles,
                got: values.len(),
            });
        }
        for (cell, q) in values.chunks(n_quantiles).enumerate() {
            validate_quantiles(q).map_err(|e| {
                Error::InvalidInput(format!(
                    "gridpoint row {}, col {}: {e}",
                    cell / spec.n_cols,
                    cell % spec.n_cols
                ))
            })?;
        }
        Ok(Self {
            spec,
            timestamp,
            lead_time_h,
            alpha_min: 0.0001,
            alpha_max: 0.9999,
            n_quantiles,
            values,
        })
    }

    pub fn n_quantiles(&self) -> usize {
        self.n_quantiles
    }

    pub fn gridpoint(&self, row: usize, col: usize) -> &[f64] {
        let cell = row * self.spec.n_cols + col;
        &self.values[cell * self.n_quantiles..(cell + 1) * self.n_quantiles]
    }

    /// α levels evenly spaced on `[alpha_min, alpha_max]`.
    pub fn alphas(&self) -> Vec<f64> {
        alpha_levels(self.n_quantiles, self.alpha_min, self.alpha_max)
    }

    pub fn sidecar_path(csv: &Path) -> PathBuf {
        csv.with_extension("json")
    }

    /// Writes the CSV (one row per gridpoint) and its JSON sidecar.
    pub fn write(&self, csv_path: &Path) -> Result<()> {
        let file = File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(csv_path, e);
        for q in self.values.chunks(self.n_quantiles) {
            let line: Vec<String> = q.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)?;
        let side = QuantileSidecar {
            n_rows: self.spec.n_rows,
            n_cols: self.spec.n_cols,
            timestamp: self.timestamp,
            lead_time_h: self.lead_time_h,
            alpha_min: self.alpha_min,
            alpha_max: self.alpha_max,
        };
        let sp = Self::sidecar_path(csv_path);
        std::fs::write(&sp, serde_json::to_vec_pretty(&side)?).map_err(|e| Error::io(&sp, e))
    }

    pub fn read(csv_path: &Path) -> Result<Self> {
        let sp = Self::sidecar_path(csv_path);
        let side: QuantileSidecar = serde_json::from_slice(&std::fs::read(&sp).map_err(|e| Error::io(&sp, e))?)
            .map_err(|e| Error::format(sp.display(), e.to_string()))?;
        let spec = GridSpec::new(side.n_rows, side.n_cols)?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(csv_path)
            .map_err(|e| Error::format(csv_path.display(), e.to_string()))?;
        let mut values = Vec::new();
        let mut n_q = None;
        let mut rows = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::format(csv_path.display(), e.to_string()))?;
            if *n_q.get_or_insert(rec.len()) != rec.len() {
                return Err(Error::format(csv_path.display(), format!("row {i} has {} columns", rec.len())));
            }
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    Error::format(csv_path.display(), format!("unparsable value '{cell}' at row {i}, col {j}"))
                })?;
                values.push(v);
            }
            rows += 1;
        }
        if rows != spec.n_cells() {
            return Err(Error::format(
                csv_path.display(),
                format!("found {rows} gridpoint rows, expected {}", spec.n_cells()),
            ));
        }
        let mut f = Self::new(spec, side.timestamp, side.lead_time_h, n_q.unwrap_or(0), values)
            .map_err(|e| Error::format(csv_path.display(), e.to_string()))?;
        f.alpha_min = side.alpha_min;
        f.alpha_max = side.alpha_max;
        Ok(f)
    }
}

pub fn alpha_levels(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![(lo + hi) / 2.0];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn validate_quantiles(q: &[f64]) -> Result<()> {
    if let Some(v) = q.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidInput(format!("quantile {v} is negative or non-finite")));
    }
    if q.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("quantiles are not non-decreasing".into()));
    }
    Ok(())
}
