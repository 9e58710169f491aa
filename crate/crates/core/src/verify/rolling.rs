//! Rolling-origin validation: refit on data up to each origin t_c, forecast
//! the following hours and score against the observations.

use std::time::Instant;

use log::{debug, info};
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::areapred::{observed_statistic, AreaPrediction, AreaStatistic};
use crate::config::{ModelTag, PipelineConfig};
use crate::dataset::{Dataset, HOUR};
use crate::grid::{sample_areas, Area, GridField};
use crate::marginals::QuantileForecast;
use crate::rng::{derive_seed, substream};
use crate::rvine::{assemble_training_set, FittedRVine, VineFitOptions};
use crate::shuffle::{drop_last, hill_climb, member_quality, random_arrange, sort_arrange, HillClimbOptions, SampleMatrix};
use crate::{Error, Result};

use super::metrics::{spatial_metrics, METRIC_NAMES};
use super::objects::OBJECT_THRESHOLD;
use super::pit::pit_bin;
use super::records::{QualityRecord, VerificationRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct RollingConfig {
    pub min_train_hours: usize,
    pub refit_every_hours: usize,
    pub lead_times: Vec<u32>,
    pub thresholds: Vec<f64>,
    pub statistic: AreaStatistic,
    pub models: Vec<ModelTag>,
    pub seed: u64,
    pub side: usize,
    pub members: usize,
    pub truncation: usize,
    pub max_failures: usize,
    pub validate_every: usize,
    pub max_train_rows: usize,
    pub workers: usize,
    pub resolution: f64,
    pub pooled_marginals: bool,
}

impl From<&PipelineConfig> for RollingConfig {
    fn from(c: &PipelineConfig) -> Self {
        Self {
            min_train_hours: c.min_train_days * 24,
            refit_every_hours: c.refit_every,
            lead_times: c.lead_times.clone(),
            thresholds: c.thresholds.clone(),
            statistic: c.statistic,
            models: c.models.clone(),
            seed: c.seed,
            side: c.side,
            members: c.members,
            truncation: c.truncation,
            max_failures: c.max_failures,
            validate_every: c.validate_every,
            max_train_rows: c.max_train_rows,
            workers: c.workers,
            resolution: c.resolution,
            pooled_marginals: c.pooled_marginals,
        }
    }
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self::from(&PipelineConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub fit_time: i64,
    pub n_rows: usize,
    pub train_min_timestamp: i64,
    pub train_max_timestamp: i64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RollingSummary {
    pub origins: usize,
    pub area_forecasts: usize,
    pub records: usize,
    /// (origin, lead) pairs without an observation or forecast.
    pub skipped: usize,
    pub fits: Vec<FitSummary>,
    pub quality: Vec<QualityRecord>,
    pub seconds: f64,
}

/// Validation origins: every `validate_every`-th observation time with at
/// least `min_train_hours` observations up to it and an observation at the
/// shortest lead time within the dataset.
pub fn origins(ds: &dyn Dataset, cfg: &RollingConfig) -> Result<Vec<i64>> {
    let obs = ds.observations();
    let min_lead = cfg.lead_times.iter().copied().min().unwrap_or(1) as i64;
    if cfg.min_train_hours == 0 || obs.len() <= cfg.min_train_hours {
        return Err(Error::InsufficientData {
            needed: cfg.min_train_hours + 1,
            got: obs.len(),
        });
    }
    let last = obs[obs.len() - 1].timestamp;
    Ok(obs[cfg.min_train_hours - 1..]
        .iter()
        .map(|f| f.timestamp)
        .filter(|&t| t + min_lead * HOUR <= last)
        .step_by(cfg.validate_every.max(1))
        .collect())
}

/// Model fitted on the training window ending at an origin.
#[derive(Debug, Clone)]
pub struct WindowFit {
    pub model: FittedRVine,
    pub summary: FitSummary,
    /// Training-window exceedance frequency per threshold.
    pub climatology: Vec<f64>,
}

/// Fits a vine on observations up to `t_c`, taking areas hour by hour
/// backwards from `t_c` until `max_train_rows` rows are collected.
pub fn fit_window(ds: &dyn Dataset, cfg: &RollingConfig, t_c: i64) -> Result<WindowFit> {
    let start = Instant::now();
    let spec = ds.spec();
    let past: Vec<&GridField> = ds.observations().iter().filter(|f| f.timestamp <= t_c).collect();
    let mut fields = Vec::new();
    let mut areas = Vec::new();
    let mut rows = 0;
    for f in past.iter().rev() {
        let a = sample_areas(&spec, cfg.side, &mut substream(cfg.seed, "train", &[f.timestamp]), cfg.max_failures)?;
        rows += a.len();
        fields.push(*f);
        areas.push(a);
        if cfg.max_train_rows > 0 && rows >= cfg.max_train_rows {
            break;
        }
    }
    fields.reverse();
    areas.reverse();
    let training = assemble_training_set(&fields, &areas)?;
    let opts = VineFitOptions {
        truncation: cfg.truncation,
        seed: derive_seed(cfg.seed, "fit", &[t_c]),
        resolution: cfg.resolution,
        pooled_marginals: cfg.pooled_marginals,
        ..VineFitOptions::default()
    };
    let model = FittedRVine::fit(&training, &opts, &format!("origin-{t_c}"))?;
    let stamps = &model.meta().timestamps;
    let (train_min, train_max) = (stamps[0], stamps[stamps.len() - 1]);
    if train_max > t_c {
        return Err(Error::InvalidInput(format!("training data at {train_max} lies after origin {t_c}")));
    }
    let m = training.m() as f64;
    let stats: Vec<f64> = training
        .values
        .rows()
        .into_iter()
        .map(|r| match cfg.statistic {
            AreaStatistic::Mean => r.sum() / m,
            AreaStatistic::Total => r.sum(),
        })
        .collect();
    let climatology = cfg
        .thresholds
        .iter()
        .map(|&z| stats.iter().filter(|&&s| s > z).count() as f64 / stats.len() as f64)
        .collect();
    let summary = FitSummary {
        fit_time: t_c,
        n_rows: training.n_rows(),
        train_min_timestamp: train_min,
        train_max_timestamp: train_max,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok(WindowFit {
        model,
        summary,
        climatology,
    })
}

struct Job<'a> {
    lead: u32,
    area_id: usize,
    area: Area,
    obs: &'a GridField,
    forecast: &'a QuantileForecast,
    reference: Option<&'a [GridField]>,
}

fn member_field(x: &SampleMatrix, j: usize, side: usize) -> Array2<f64> {
    Array2::from_shape_vec((side, side), x.member(j)).expect("m = side²")
}

fn run_job(cfg: &RollingConfig, fit: &WindowFit, t_c: i64, job: &Job<'_>) -> Result<(Vec<VerificationRecord>, Option<QualityRecord>)> {
    let keys = [t_c, i64::from(job.lead), job.area_id as i64];
    let side = job.area.side;
    let wants = |m: ModelTag| cfg.models.contains(&m);
    let mut ensembles: Vec<(ModelTag, SampleMatrix)> = Vec::new();
    let mut quality = None;
    if wants(ModelTag::Copula) || wants(ModelTag::CopulaSorted) || wants(ModelTag::Random) {
        let x = SampleMatrix::from_forecast(job.forecast, &job.area, cfg.members, &mut substream(cfg.seed, "sample", &keys))?;
        let opts = HillClimbOptions {
            record_swaps: false,
            ..HillClimbOptions::default()
        };
        let climbed = hill_climb(&x, &fit.model, &opts, &mut substream(cfg.seed, "shuffle", &keys))?;
        if wants(ModelTag::Copula) {
            quality = Some(QualityRecord {
                issue_time: t_c,
                lead_time_h: job.lead,
                area_id: job.area_id,
                ratios: member_quality(&climbed.matrix, &fit.model)?,
            });
        }
        // Baselines rearrange the same retained values.
        let base = drop_last(&climbed.matrix)?;
        for &m in &cfg.models {
            match m {
                ModelTag::Copula => ensembles.push((m, base.clone())),
                ModelTag::CopulaSorted => ensembles.push((m, sort_arrange(&base))),
                ModelTag::Random => {
                    ensembles.push((m, random_arrange(&base, &mut substream(cfg.seed, "random", &keys))))
                }
                ModelTag::Reference => {}
            }
        }
    }
    if let (true, Some(refs)) = (wants(ModelTag::Reference), job.reference) {
        let rows: Vec<Vec<f64>> = (0..job.area.m())
            .map(|i| refs.iter().map(|f| f.slice(&job.area)[[i / side, i % side]]).collect())
            .collect();
        ensembles.push((ModelTag::Reference, SampleMatrix::from_rows(&rows)?));
    }
    // Keep the configured model order.
    ensembles.sort_by_key(|(m, _)| cfg.models.iter().position(|c| c == m));

    let obs_view: ArrayView2<'_, f64> = job.obs.slice(&job.area);
    let obs_values: Vec<f64> = obs_view.iter().copied().collect();
    let obs_stat = observed_statistic(&obs_values, cfg.statistic);
    let precip_subset = obs_values.iter().any(|&v| v >= OBJECT_THRESHOLD);
    let obs_metrics = spatial_metrics(obs_view);
    let metric_values = METRIC_NAMES
        .iter()
        .zip(&obs_metrics)
        .filter_map(|(n, v)| v.map(|v| (n.to_string(), v)))
        .collect::<std::collections::BTreeMap<_, _>>();

    let mut records = Vec::new();
    for (mi, (tag, ens)) in ensembles.iter().enumerate() {
        let pred = AreaPrediction::new(ens, cfg.statistic, &cfg.thresholds)?;
        let member_metrics: Vec<[Option<f64>; 10]> = (0..ens.n_members())
            .map(|j| spatial_metrics(member_field(ens, j, side).view()))
            .collect();
        let mut rng = substream(cfg.seed, "pit", &[t_c, i64::from(job.lead), job.area_id as i64, mi as i64]);
        let mut pit_bins = std::collections::BTreeMap::new();
        for (k, name) in METRIC_NAMES.iter().enumerate() {
            let Some(o) = obs_metrics[k] else { continue };
            let vals: Option<Vec<f64>> = member_metrics.iter().map(|mm| mm[k]).collect();
            if let Some(vals) = vals {
                pit_bins.insert(name.to_string(), pit_bin(o, &vals, &mut rng)?);
            }
        }
        for (ti, &(z, p)) in pred.probabilities.iter().enumerate() {
            records.push(VerificationRecord {
                issue_time: t_c,
                timestamp: job.obs.timestamp,
                lead_time_h: job.lead,
                area_id: job.area_id,
                area: job.area,
                model: *tag,
                threshold: z,
                forecast_prob: p,
                observed_outcome: u8::from(obs_stat > z),
                climatology: fit.climatology[ti],
                precip_subset,
                n_members: ens.n_members(),
                fit_time: fit.summary.fit_time,
                train_max_timestamp: fit.summary.train_max_timestamp,
                metric_values: metric_values.clone(),
                pit_bins: pit_bins.clone(),
            });
        }
    }
    Ok((records, quality))
}

/// Runs the harness, handing records to `sink` in deterministic order
/// (origin, lead time, area, model, threshold).
pub fn rolling_origin(
    ds: &dyn Dataset,
    cfg: &RollingConfig,
    sink: &mut dyn FnMut(VerificationRecord) -> Result<()>,
) -> Result<RollingSummary> {
    if cfg.workers == 0 || cfg.members < 2 || cfg.models.is_empty() || cfg.lead_times.is_empty() {
        return Err(Error::Config("rolling-origin run needs workers, members >= 2, models and lead times".into()));
    }
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let origins = origins(ds, cfg)?;
    let spec = ds.spec();
    let mut summary = RollingSummary {
        origins: origins.len(),
        ..RollingSummary::default()
    };
    let mut fit: Option<WindowFit> = None;
    for (step, &t_c) in origins.iter().enumerate() {
        let due = fit
            .as_ref()
            .map_or(true, |f| t_c - f.summary.fit_time >= cfg.refit_every_hours as i64 * HOUR);
        if due {
            let w = fit_window(ds, cfg, t_c)?;
            debug!("refit at {t_c}: {} rows in {:.2}s", w.summary.n_rows, w.summary.seconds);
            summary.fits.push(w.summary.clone());
            fit = Some(w);
        }
        let fit = fit.as_ref().expect("fitted above");
        let mut inputs = Vec::new();
        for &lead in &cfg.lead_times {
            let valid = t_c + i64::from(lead) * HOUR;
            let (Some(obs), Some(fc)) = (ds.observation(valid), ds.forecast(valid, lead)?) else {
                summary.skipped += 1;
                continue;
            };
            let reference = if cfg.models.contains(&ModelTag::Reference) {
                ds.reference(valid, lead)?
            } else {
                None
            };
            let areas = sample_areas(&spec, cfg.side, &mut substream(cfg.seed, "eval", &[t_c, i64::from(lead)]), cfg.max_failures)?;
            inputs.push((lead, obs, fc, reference, areas));
        }
        let jobs: Vec<Job<'_>> = inputs
            .iter()
            .flat_map(|(lead, obs, fc, reference, areas)| {
                areas.iter().enumerate().map(move |(area_id, area)| Job {
                    lead: *lead,
                    area_id,
                    area: *area,
                    obs,
                    forecast: fc,
                    reference: reference.as_deref(),
                })
            })
            .collect();
        let results: Vec<Result<_>> = pool.install(|| jobs.par_iter().map(|j| run_job(cfg, fit, t_c, j)).collect());
        summary.area_forecasts += jobs.len();
        for r in results {
            let (records, quality) = r?;
            summary.records += records.len();
            for rec in records {
                sink(rec)?;
            }
            summary.quality.extend(quality);
        }
        if (step + 1) % 24 == 0 {
            info!("origin {}/{}: {} records, {:.0}s", step + 1, origins.len(), summary.records, start.elapsed().as_secs_f64());
        }
    }
    summary.seconds = start.elapsed().as_secs_f64();
    Ok(summary)
}

/// Convenience wrapper collecting all records in memory.
pub fn rolling_origin_collect(ds: &dyn Dataset, cfg: &RollingConfig) -> Result<(Vec<VerificationRecord>, RollingSummary)> {
    let mut out = Vec::new();
    let summary = rolling_origin(ds, cfg, &mut |r| {
        out.push(r);
        Ok(())
    })?;
    Ok((out, summary))
}
