//! `vineshuffle` command-line front end.

mod args;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use log::{info, warn};
use vineshuffle::areapred::{write_predictions, AreaPrediction, PredictionRow};
use vineshuffle::config::PipelineConfig;
use vineshuffle::dataset::{write_dataset, Dataset, DirDataset, HOUR};
use vineshuffle::grid::sample_areas;
use vineshuffle::rng::substream;
use vineshuffle::rvine::FittedRVine;
use vineshuffle::shuffle::{drop_last, hill_climb, read_ensemble, write_ensemble, EnsembleMeta, HillClimbOptions, SampleMatrix};
use vineshuffle::synth::SyntheticDataset;
use vineshuffle::verify::{fit_window, report, rolling_origin, write_ndjson, NdjsonWriter, RollingConfig};
use vineshuffle::{Error, Result};

use args::{base_config, required, Cli, Command, FitArgs, PredictArgs, ShuffleArgs};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_DATA })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = base_config(&cli.global)?;
    match cli.command {
        Command::Simulate(a) => {
            a.apply(&mut cfg)?;
            cfg.validate()?;
            simulate(&cfg)
        }
        Command::Fit(a) => {
            a.apply(&mut cfg);
            cfg.validate()?;
            fit(&cfg, &a)
        }
        Command::Shuffle(a) => {
            a.apply(&mut cfg);
            cfg.validate()?;
            shuffle(&cfg, &a)
        }
        Command::PredictArea(a) => {
            a.apply(&mut cfg)?;
            cfg.validate()?;
            predict(&cfg, &a)
        }
        Command::Verify(a) => {
            a.apply(&mut cfg)?;
            cfg.validate()?;
            verify(&cfg)
        }
    }
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::Io {
        path: p.to_path_buf(),
        source: e,
    })
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)?).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn simulate(cfg: &PipelineConfig) -> Result<()> {
    let out = required(&cfg.data_dir, "data_dir")?;
    let s = &cfg.simulation;
    let ds = SyntheticDataset::generate(s, cfg.seed)?;
    let provenance = serde_json::json!({ "generator": "synthetic", "seed": cfg.seed, "config": s });
    let m = write_dataset(&ds, out, &s.export_lead_times, cfg.format, s.reference_members, provenance)?;
    info!("wrote {} hours, lead times {:?}, to {}", m.timestamps.len(), m.lead_times, out.display());
    Ok(())
}

fn fit(cfg: &PipelineConfig, a: &FitArgs) -> Result<()> {
    let data = required(&cfg.data_dir, "data_dir")?;
    let out = required(&cfg.model_path, "model_path")?;
    let ds = DirDataset::open(data)?;
    let last = ds
        .observations()
        .last()
        .map(|f| f.timestamp)
        .ok_or_else(|| Error::InsufficientData { needed: 1, got: 0 })?;
    let at = a.at.unwrap_or(last);
    let w = fit_window(&ds, &RollingConfig::from(cfg), at)?;
    w.model.save(out)?;
    info!(
        "fitted on {} rows from {} to {} in {:.2}s",
        w.summary.n_rows, w.summary.train_min_timestamp, w.summary.train_max_timestamp, w.summary.seconds
    );
    Ok(())
}

fn shuffle(cfg: &PipelineConfig, a: &ShuffleArgs) -> Result<()> {
    let data = required(&cfg.data_dir, "data_dir")?;
    let model_path = required(&cfg.model_path, "model_path")?;
    let out = required(&cfg.out_dir, "out_dir")?;
    let ds = DirDataset::open(data)?;
    let model = FittedRVine::load(model_path)?;
    if model.marginals().len() != cfg.side * cfg.side {
        return Err(Error::Config(format!(
            "model {} covers {} gridpoints but side {} needs {}",
            model_path.display(),
            model.marginals().len(),
            cfg.side,
            cfg.side * cfg.side
        )));
    }
    let lead = a.lead_time.unwrap_or(cfg.lead_times[0]);
    let times: Vec<i64> = match &a.times {
        Some(t) => vineshuffle::config::parse_list(t)?,
        None => ds.manifest().timestamps.last().copied().into_iter().collect(),
    };
    create_dir(out)?;
    let spec = ds.spec();
    let opts = HillClimbOptions {
        record_swaps: false,
        ..HillClimbOptions::default()
    };
    for t in times {
        let fc = ds
            .forecast(t, lead)?
            .ok_or_else(|| Error::InvalidInput(format!("no forecast for valid time {t} at lead {lead} h in {}", data.display())))?;
        // Same streams as the rolling-origin harness for origin t - lead.
        let t_c = t - i64::from(lead) * HOUR;
        let areas = sample_areas(&spec, cfg.side, &mut substream(cfg.seed, "eval", &[t_c, i64::from(lead)]), cfg.max_failures)?;
        for (area_id, area) in areas.iter().enumerate() {
            let keys = [t_c, i64::from(lead), area_id as i64];
            let x = SampleMatrix::from_forecast(&fc, area, cfg.members, &mut substream(cfg.seed, "sample", &keys))?;
            let climbed = hill_climb(&x, &model, &opts, &mut substream(cfg.seed, "shuffle", &keys))?;
            if climbed.log.members.iter().any(|m| m.hit_cap) {
                warn!("pass cap reached at {t}, area {area_id}");
            }
            let meta = EnsembleMeta::from_log(&climbed.log, t, lead, area_id, *area, cfg.seed);
            let path = out.join(format!("ens_{t}_{lead}_{area_id}.{}", cfg.format.extension()));
            write_ensemble(&path, &drop_last(&climbed.matrix)?, &meta, cfg.format)?;
            info!("{}: log-likelihood {:.2} -> {:.2}", path.display(), meta.initial_ll, meta.final_ll);
        }
    }
    Ok(())
}

fn predict(cfg: &PipelineConfig, a: &PredictArgs) -> Result<()> {
    let dir = required(&cfg.out_dir, "out_dir")?;
    let ext = format!(".{}", cfg.format.extension());
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let mut files: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("ens_") && n.ends_with(&ext))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidInput(format!("no ens_*{ext} files in {}", dir.display())));
    }
    let mut rows = Vec::new();
    for f in &files {
        let (x, meta) = read_ensemble(f, cfg.format)?;
        let p = AreaPrediction::new(&x, cfg.statistic, &cfg.thresholds)?;
        rows.extend(PredictionRow::from_prediction(&p, meta.timestamp, meta.lead_time_h, meta.area_id));
    }
    rows.sort_by(|x, y| (x.timestamp, x.lead_time, x.area_id).cmp(&(y.timestamp, y.lead_time, y.area_id)));
    write_predictions(&a.out, &rows)
}

fn verify(cfg: &PipelineConfig) -> Result<()> {
    let data = required(&cfg.data_dir, "data_dir")?;
    let out = required(&cfg.out_dir, "out_dir")?;
    let ds = DirDataset::open(data)?;
    let mut rc = RollingConfig::from(cfg);
    let available = &ds.manifest().lead_times;
    let dropped: Vec<u32> = rc.lead_times.iter().copied().filter(|l| !available.contains(l)).collect();
    if !dropped.is_empty() {
        warn!("no forecasts for lead times {dropped:?} in {}; skipping them", data.display());
    }
    rc.lead_times.retain(|l| available.contains(l));
    if rc.lead_times.is_empty() {
        return Err(Error::InvalidInput(format!(
            "none of the requested lead times exist in {} (available {available:?})",
            data.display()
        )));
    }
    create_dir(out)?;
    let mut writer = NdjsonWriter::create(&out.join("records.ndjson"))?;
    let mut records = Vec::new();
    let summary = rolling_origin(&ds, &rc, &mut |r| {
        writer.push(&r)?;
        records.push(r);
        Ok(())
    })?;
    writer.finish()?;
    write_ndjson(&out.join("quality.ndjson"), &summary.quality)?;
    report(&records, &summary.quality)?.write(out)?;
    let overview = serde_json::json!({
        "origins": summary.origins,
        "area_forecasts": summary.area_forecasts,
        "records": summary.records,
        "skipped": summary.skipped,
        "fits": summary.fits,
        "seconds": summary.seconds,
        "config": cfg,
    });
    write_json(&out.join("summary.json"), &overview)?;
    info!(
        "{} origins, {} area forecasts, {} records in {:.1}s",
        summary.origins, summary.area_forecasts, summary.records, summary.seconds
    );
    Ok(())
}
