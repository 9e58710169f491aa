//! Hourly observations plus quantile forecasts, in memory or on disk.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::grid::{read_field, write_field, FieldFormat, GridField, GridSpec};
use crate::marginals::QuantileForecast;
use crate::{Error, Result};

/// Seconds per hour; timestamps are Unix seconds.
pub const HOUR: i64 = 3600;

pub const DATASET_SCHEMA: &str = "vineshuffle.dataset.v1";

/// Source of observations and forecasts for the rolling-origin harness.
/// Forecasts are fetched lazily per (valid time, lead time).
pub trait Dataset: Sync {
    fn spec(&self) -> GridSpec;

    /// Observed fields in ascending timestamp order.
    fn observations(&self) -> &[GridField];

    /// Quantile forecast valid at `valid_time`, issued `lead_time_h` hours earlier.
    fn forecast(&self, valid_time: i64, lead_time_h: u32) -> Result<Option<QuantileForecast>>;

    /// Optional input ensemble for the same (valid time, lead time).
    fn reference(&self, _valid_time: i64, _lead_time_h: u32) -> Result<Option<Vec<GridField>>> {
        Ok(None)
    }

    fn observation(&self, t: i64) -> Option<&GridField> {
        let obs = self.observations();
        obs.binary_search_by_key(&t, |f| f.timestamp).ok().map(|i| &obs[i])
    }
}

/// Directory index written next to the data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub spec: GridSpec,
    pub format: FieldFormat,
    pub timestamps: Vec<i64>,
    pub lead_times: Vec<u32>,
    pub reference_members: usize,
    /// Free-form description of how the data were produced.
    #[serde(default)]
    pub provenance: serde_json::Value,
}

fn obs_path(root: &Path, t: i64, format: FieldFormat) -> PathBuf {
    root.join("obs").join(format!("obs_{t}.{}", format.extension()))
}

fn forecast_path(root: &Path, t: i64, lead: u32) -> PathBuf {
    root.join("forecasts").join(format!("fc_{t}_{lead}.csv"))
}

fn reference_path(root: &Path, t: i64, lead: u32, k: usize, format: FieldFormat) -> PathBuf {
    root.join("reference").join(format!("ref_{t}_{lead}_{k}.{}", format.extension()))
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Writes observations, forecasts for `lead_times` and, when
/// `reference_members > 0`, the reference ensembles.
pub fn write_dataset(
    ds: &dyn Dataset,
    root: &Path,
    lead_times: &[u32],
    format: FieldFormat,
    reference_members: usize,
    provenance: serde_json::Value,
) -> Result<Manifest> {
    for sub in ["obs", "forecasts", "reference"] {
        create_dir(&root.join(sub))?;
    }
    let mut timestamps = Vec::with_capacity(ds.observations().len());
    for f in ds.observations() {
        write_field(f, &obs_path(root, f.timestamp, format), format)?;
        timestamps.push(f.timestamp);
    }
    for &t in &timestamps {
        for &lead in lead_times {
            if let Some(fc) = ds.forecast(t, lead)? {
                fc.write(&forecast_path(root, t, lead))?;
            }
            if reference_members > 0 {
                if let Some(members) = ds.reference(t, lead)? {
                    for (k, m) in members.iter().take(reference_members).enumerate() {
                        write_field(m, &reference_path(root, t, lead, k, format), format)?;
                    }
                }
            }
        }
    }
    let manifest = Manifest {
        schema: DATASET_SCHEMA.into(),
        spec: ds.spec(),
        format,
        timestamps,
        lead_times: lead_times.to_vec(),
        reference_members,
        provenance,
    };
    let path = root.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Dataset directory produced by [`write_dataset`]. Observations are loaded
/// eagerly, forecasts on request.
#[derive(Debug, Clone)]
pub struct DirDataset {
    root: PathBuf,
    manifest: Manifest,
    observations: Vec<GridField>,
}

impl DirDataset {
    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::format(path.display(), e.to_string()))?;
        if manifest.schema != DATASET_SCHEMA {
            return Err(Error::format(path.display(), format!("unsupported schema '{}'", manifest.schema)));
        }
        let mut observations = Vec::with_capacity(manifest.timestamps.len());
        for &t in &manifest.timestamps {
            let p = obs_path(root, t, manifest.format);
            let f = read_field(&p, manifest.format)?;
            if f.spec().n_rows != manifest.spec.n_rows || f.spec().n_cols != manifest.spec.n_cols {
                return Err(Error::format(p.display(), "field shape differs from the manifest"));
            }
            if f.timestamp != t {
                return Err(Error::format(p.display(), format!("timestamp {} differs from file name", f.timestamp)));
            }
            observations.push(f);
        }
        if observations.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
            return Err(Error::format(path.display(), "observations are not in strictly ascending time order"));
        }
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
            observations,
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }
}

impl Dataset for DirDataset {
    fn spec(&self) -> GridSpec {
        self.manifest.spec
    }

    fn observations(&self) -> &[GridField] {
        &self.observations
    }

    fn forecast(&self, valid_time: i64, lead_time_h: u32) -> Result<Option<QuantileForecast>> {
        let p = forecast_path(&self.root, valid_time, lead_time_h);
        if !p.exists() {
            return Ok(None);
        }
        QuantileForecast::read(&p).map(Some)
    }

    fn reference(&self, valid_time: i64, lead_time_h: u32) -> Result<Option<Vec<GridField>>> {
        let k = self.manifest.reference_members;
        if k == 0 || !reference_path(&self.root, valid_time, lead_time_h, 0, self.manifest.format).exists() {
            return Ok(None);
        }
        (0..k)
            .map(|i| read_field(&reference_path(&self.root, valid_time, lead_time_h, i, self.manifest.format), self.manifest.format))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

/// Fully materialised dataset, mainly for tests and small inputs.
#[derive(Debug, Clone)]
pub struct MemoryDataset {
    pub spec: GridSpec,
    pub observations: Vec<GridField>,
    pub forecasts: std::collections::BTreeMap<(i64, u32), QuantileForecast>,
}

impl Dataset for MemoryDataset {
    fn spec(&self) -> GridSpec {
        self.spec
    }

    fn observations(&self) -> &[GridField] {
        &self.observations
    }

    fn forecast(&self, valid_time: i64, lead_time_h: u32) -> Result<Option<QuantileForecast>> {
        Ok(self.forecasts.get(&(valid_time, lead_time_h)).cloned())
    }
}
