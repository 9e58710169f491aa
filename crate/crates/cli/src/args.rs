//! Command-line arguments and their merge into a [`PipelineConfig`].

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use vineshuffle::areapred::AreaStatistic;
use vineshuffle::config::{parse_list, ModelTag, PipelineConfig};
use vineshuffle::grid::FieldFormat;
use vineshuffle::synth::ForecastMode;
use vineshuffle::Result;

#[derive(Debug, Parser)]
#[command(
    name = "vineshuffle",
    version,
    about = "Spatially coherent precipitation ensembles from gridpoint quantile forecasts via discrete R-vine copulas",
    long_about = "Spatially coherent precipitation ensembles from gridpoint quantile forecasts via discrete R-vine copulas.\n\n\
                  Settings come from an optional JSON file (--config) whose keys match the long flag names with \
                  underscores, with synthetic-data settings under \"simulation\"; flags given on the command line win. Exit codes: 0 success, 2 configuration error, 3 data error."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON configuration file; absent keys keep their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed; every random stream is derived from it [default: 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Field file format, csv or bin [default: bin].
    #[arg(long, global = true)]
    pub format: Option<FieldFormat>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic dataset: observations, quantile forecasts and a reference ensemble.
    Simulate(SimulateArgs),
    /// Fit a truncated R-vine with discrete marginals on observations up to a time.
    Fit(FitArgs),
    /// Sample quantile forecasts per area and rearrange them into ensemble members.
    Shuffle(ShuffleArgs),
    /// Area exceedance probabilities from shuffled ensemble files.
    PredictArea(PredictArgs),
    /// Rolling-origin verification with scores, reliability and rank histograms.
    Verify(VerifyArgs),
}

/// Model settings shared by fit, shuffle and verify.
#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Side length of the square evaluation areas; m = side² [default: 9].
    #[arg(long)]
    pub side: Option<usize>,
    /// Highest vine tree with non-independence pair copulas [default: 5].
    #[arg(long)]
    pub truncation: Option<usize>,
    /// Samples per gridpoint before the worst member is dropped [default: 20].
    #[arg(long)]
    pub members: Option<usize>,
    /// Most recent training rows (areas) kept per fit; 0 keeps all [default: 1000].
    #[arg(long)]
    pub max_train_rows: Option<usize>,
    /// Consecutive rejected placements before area sampling stops [default: 10000].
    #[arg(long)]
    pub max_failures: Option<usize>,
    /// Precipitation resolution in mm used to snap values [default: 0.01].
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Share one marginal distribution across all gridpoints of an area [default: off].
    #[arg(long)]
    pub pooled: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Dataset directory to write.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Hours to simulate [default: 720].
    #[arg(long)]
    pub hours: Option<usize>,
    /// Window rows [default: 9].
    #[arg(long)]
    pub rows: Option<usize>,
    /// Window columns [default: 18].
    #[arg(long)]
    pub cols: Option<usize>,
    /// calibrated or miscalibrated forecasts [default: calibrated].
    #[arg(long)]
    pub mode: Option<ForecastMode>,
    /// Fixed probability of zero precipitation, overriding the weather regime.
    #[arg(long)]
    pub zero_inflation: Option<f64>,
    /// Reference ensemble members per forecast; 0 writes none [default: 19].
    #[arg(long)]
    pub reference_members: Option<usize>,
    /// Comma-separated lead times to write, in hours [default: 1].
    #[arg(long)]
    pub lead_times: Option<String>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset directory written by simulate.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Model file to write (JSON).
    #[arg(long)]
    pub model_path: Option<PathBuf>,
    /// Latest observation time (Unix seconds) usable for training [default: last].
    #[arg(long)]
    pub at: Option<i64>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct ShuffleArgs {
    /// Dataset directory written by simulate.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Model file written by fit.
    #[arg(long)]
    pub model_path: Option<PathBuf>,
    /// Output directory for ensemble files.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Comma-separated valid times (Unix seconds) [default: last observation].
    #[arg(long)]
    pub times: Option<String>,
    /// Lead time in hours [default: first configured lead time].
    #[arg(long)]
    pub lead_time: Option<u32>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Directory of ensemble files written by shuffle [default: out_dir].
    #[arg(long)]
    pub ensembles: Option<PathBuf>,
    /// Prediction CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated thresholds in mm [default: 0.62,1.23,2.47,3.7].
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Area aggregate compared with the thresholds, mean or total [default: mean].
    #[arg(long)]
    pub statistic: Option<AreaStatistic>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Dataset directory written by simulate.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Output directory for records and score tables.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Days of observations before the first origin [default: 7].
    #[arg(long)]
    pub min_train_days: Option<usize>,
    /// Hours between refits [default: 24].
    #[arg(long)]
    pub refit_every: Option<usize>,
    /// Hours between validation origins [default: 1].
    #[arg(long)]
    pub validate_every: Option<usize>,
    /// Comma-separated thresholds in mm [default: 0.62,1.23,2.47,3.7].
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Comma-separated models: copula, sorted, random, reference [default: copula,sorted,random].
    #[arg(long)]
    pub models: Option<String>,
    /// Comma-separated lead times in hours [default: 1,2,3,4,5,6].
    #[arg(long)]
    pub lead_times: Option<String>,
    /// Area aggregate compared with the thresholds, mean or total [default: mean].
    #[arg(long)]
    pub statistic: Option<AreaStatistic>,
    /// Worker threads for per-area work [default: 8].
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
}

/// Loads the config file if given, then applies the global flags.
pub fn base_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut c = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(f) = g.format {
        c.format = f;
    }
    Ok(c)
}

impl ModelArgs {
    pub fn apply(&self, c: &mut PipelineConfig) {
        set(&mut c.side, self.side);
        set(&mut c.truncation, self.truncation);
        set(&mut c.members, self.members);
        set(&mut c.max_train_rows, self.max_train_rows);
        set(&mut c.max_failures, self.max_failures);
        set(&mut c.resolution, self.resolution);
        if self.pooled {
            c.pooled_marginals = true;
        }
    }
}

impl FitArgs {
    pub fn apply(&self, c: &mut PipelineConfig) {
        self.model.apply(c);
        set_path(&mut c.data_dir, &self.data_dir);
        set_path(&mut c.model_path, &self.model_path);
    }
}

impl ShuffleArgs {
    pub fn apply(&self, c: &mut PipelineConfig) {
        self.model.apply(c);
        set_path(&mut c.data_dir, &self.data_dir);
        set_path(&mut c.model_path, &self.model_path);
        set_path(&mut c.out_dir, &self.out_dir);
    }
}

impl SimulateArgs {
    pub fn apply(&self, c: &mut PipelineConfig) -> Result<()> {
        set_path(&mut c.data_dir, &self.data_dir);
        let s = &mut c.simulation;
        set(&mut s.hours, self.hours);
        set(&mut s.n_rows, self.rows);
        set(&mut s.n_cols, self.cols);
        set(&mut s.mode, self.mode);
        set(&mut s.reference_members, self.reference_members);
        if self.zero_inflation.is_some() {
            s.zero_inflation = self.zero_inflation;
        }
        if let Some(l) = &self.lead_times {
            s.export_lead_times = parse_list(l)?;
        }
        s.resolution = c.resolution;
        Ok(())
    }
}

impl PredictArgs {
    pub fn apply(&self, c: &mut PipelineConfig) -> Result<()> {
        set_path(&mut c.out_dir, &self.ensembles);
        if let Some(t) = &self.thresholds {
            c.thresholds = parse_list(t)?;
        }
        set(&mut c.statistic, self.statistic);
        Ok(())
    }
}

impl VerifyArgs {
    pub fn apply(&self, c: &mut PipelineConfig) -> Result<()> {
        self.model.apply(c);
        set_path(&mut c.data_dir, &self.data_dir);
        set_path(&mut c.out_dir, &self.out_dir);
        set(&mut c.min_train_days, self.min_train_days);
        set(&mut c.refit_every, self.refit_every);
        set(&mut c.validate_every, self.validate_every);
        set(&mut c.statistic, self.statistic);
        set(&mut c.workers, self.workers);
        if let Some(t) = &self.thresholds {
            c.thresholds = parse_list(t)?;
        }
        if let Some(m) = &self.models {
            c.models = parse_list::<ModelTag>(m)?;
        }
        if let Some(l) = &self.lead_times {
            c.lead_times = parse_list(l)?;
        }
        Ok(())
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_path(slot: &mut Option<PathBuf>, v: &Option<PathBuf>) {
    if v.is_some() {
        slot.clone_from(v);
    }
}

/// A path that must come from a flag or the config file.
pub fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf> {
    p.as_ref()
        .ok_or_else(|| vineshuffle::Error::Config(format!("missing {key}: pass --{} or set \"{key}\" in the config file", key.replace('_', "-"))))
}
