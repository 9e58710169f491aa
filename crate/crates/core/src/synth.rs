//! Seeded synthetic truth and forecasts.
//!
//! Each hour a latent Gaussian field with exponential correlation
//! exp(−d/ℓ) is drawn over the window and mapped through a zero-inflated
//! marginal whose wet probability and intensity follow a persistent AR(1)
//! weather regime s_t. Wet amounts use a Weibull tail with shape below one,
//! discretised to the resolution. Forecasts know s_t: the calibrated mode
//! issues the true conditional marginal, the miscalibrated mode a wetter,
//! more intense one.

use nalgebra::DMatrix;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, HOUR};
use crate::grid::{GridField, GridSpec};
use crate::marginals::{alpha_levels, QuantileForecast, DEFAULT_RESOLUTION};
use crate::rng::substream;
use crate::stats::{norm_cdf, norm_quantile};
use crate::{Error, Result};

/// Dense Cholesky factors beyond this many cells get slow and large.
pub const MAX_SYNTH_CELLS: usize = 2500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecastMode {
    #[default]
    Calibrated,
    Miscalibrated,
}

impl std::str::FromStr for ForecastMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "calibrated" => Ok(Self::Calibrated),
            "miscalibrated" => Ok(Self::Miscalibrated),
            _ => Err(Error::Config(format!("unknown forecast mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_rows: usize,
    pub n_cols: usize,
    pub hours: usize,
    /// Unix seconds of the first field.
    pub start: i64,
    /// ℓ of the latent correlation exp(−d/ℓ), in cells.
    pub correlation_length: f64,
    /// AR(1) coefficient of the regime.
    pub regime_persistence: f64,
    /// Wet probability Φ(intercept + slope·s_t).
    pub wet_intercept: f64,
    pub wet_slope: f64,
    pub weibull_shape: f64,
    /// Weibull scale at s_t = 0 (mm), multiplied by exp(scale_slope·s_t).
    pub weibull_scale: f64,
    pub scale_slope: f64,
    /// Fixed probability of the 0 mm atom, overriding the regime.
    pub zero_inflation: Option<f64>,
    pub mode: ForecastMode,
    /// Probit shift of the wet probability in miscalibrated forecasts.
    pub wet_bias: f64,
    /// Scale multiplier in miscalibrated forecasts.
    pub scale_factor: f64,
    pub n_quantiles: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub reference_members: usize,
    pub resolution: f64,
    /// Lead times written to disk by the simulate command; each adds one
    /// quantile file per hour.
    pub export_lead_times: Vec<u32>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_rows: 9,
            n_cols: 18,
            hours: 720,
            start: 1_656_633_600,
            correlation_length: 4.0,
            regime_persistence: 0.95,
            wet_intercept: -0.3,
            wet_slope: 1.0,
            weibull_shape: 0.8,
            weibull_scale: 1.5,
            scale_slope: 0.5,
            zero_inflation: None,
            mode: ForecastMode::Calibrated,
            wet_bias: 0.5,
            scale_factor: 1.5,
            n_quantiles: 100,
            alpha_min: 0.0001,
            alpha_max: 0.9999,
            reference_members: 19,
            resolution: DEFAULT_RESOLUTION,
            export_lead_times: vec![1],
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("synthetic data: {what}")));
        if self.n_rows == 0 || self.n_cols == 0 || self.hours == 0 {
            return bad("window and duration must be non-empty");
        }
        if self.n_rows * self.n_cols > MAX_SYNTH_CELLS {
            return bad(&format!("window has more than {MAX_SYNTH_CELLS} cells"));
        }
        if !(self.correlation_length > 0.0) {
            return bad("correlation_length must be positive");
        }
        if !(0.0..1.0).contains(&self.regime_persistence) {
            return bad("regime_persistence must lie in [0, 1)");
        }
        if !(self.weibull_shape > 0.0 && self.weibull_scale > 0.0 && self.scale_factor > 0.0) {
            return bad("Weibull shape, scale and scale_factor must be positive");
        }
        if let Some(z) = self.zero_inflation {
            if !(0.0..=1.0).contains(&z) {
                return bad("zero_inflation must lie in [0, 1]");
            }
        }
        if self.n_quantiles == 0 || !(0.0 < self.alpha_min && self.alpha_min < self.alpha_max && self.alpha_max < 1.0) {
            return bad("need at least one quantile and 0 < alpha_min < alpha_max < 1");
        }
        if !(self.resolution > 0.0) {
            return bad("resolution must be positive");
        }
        if self.export_lead_times.contains(&0) {
            return bad("export_lead_times must be positive");
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.n_rows, self.n_cols)
    }
}

/// Generated truth plus on-demand forecasts and reference ensembles.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    config: SynthConfig,
    seed: u64,
    spec: GridSpec,
    chol: DMatrix<f64>,
    regimes: Vec<f64>,
    observations: Vec<GridField>,
}

#[derive(Debug, Clone, Copy)]
struct MarginalParams {
    p_wet: f64,
    scale: f64,
    shape: f64,
}

impl SyntheticDataset {
    pub fn generate(config: &SynthConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let spec = config.spec()?;
        let n = spec.n_cells();
        let ell = config.correlation_length;
        let corr = DMatrix::from_fn(n, n, |a, b| {
            let (ra, ca) = ((a / spec.n_cols) as f64, (a % spec.n_cols) as f64);
            let (rb, cb) = ((b / spec.n_cols) as f64, (b % spec.n_cols) as f64);
            let d = (ra - rb).hypot(ca - cb);
            (-d / ell).exp() + if a == b { 1e-10 } else { 0.0 }
        });
        let chol = corr
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("latent correlation matrix is not positive definite".into()))?
            .unpack();
        let mut rng = substream(seed, "regime", &[]);
        let phi = config.regime_persistence;
        let mut s = std_normal(&mut rng);
        let mut regimes = Vec::with_capacity(config.hours);
        for _ in 0..config.hours {
            regimes.push(s);
            s = phi * s + (1.0 - phi * phi).sqrt() * std_normal(&mut rng);
        }
        let mut ds = Self {
            config: config.clone(),
            seed,
            spec,
            chol,
            regimes,
            observations: Vec::with_capacity(config.hours),
        };
        for h in 0..config.hours {
            let t = ds.timestamp(h);
            let mut rng = substream(seed, "truth", &[t]);
            let params = ds.params(h, false);
            ds.observations.push(ds.draw_field(&mut rng, params, t, 0)?);
        }
        Ok(ds)
    }

    pub fn config(&self) -> &SynthConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn timestamp(&self, hour: usize) -> i64 {
        self.config.start + hour as i64 * HOUR
    }

    fn hour_index(&self, t: i64) -> Option<usize> {
        let off = t - self.config.start;
        (off >= 0 && off % HOUR == 0 && ((off / HOUR) as usize) < self.config.hours).then(|| (off / HOUR) as usize)
    }

    /// Regime value at `t`, if inside the simulated period.
    pub fn regime(&self, t: i64) -> Option<f64> {
        self.hour_index(t).map(|h| self.regimes[h])
    }

    fn params(&self, hour: usize, distorted: bool) -> MarginalParams {
        let c = &self.config;
        let s = self.regimes[hour];
        let shift = if distorted { c.wet_bias } else { 0.0 };
        let p_wet = match c.zero_inflation {
            Some(z) => 1.0 - z,
            None => norm_cdf(c.wet_intercept + shift + c.wet_slope * s),
        };
        let factor = if distorted { c.scale_factor } else { 1.0 };
        MarginalParams {
            p_wet,
            scale: c.weibull_scale * (c.scale_slope * s).exp() * factor,
            shape: c.weibull_shape,
        }
    }

    /// Discretised amount at marginal level `u`.
    fn amount(&self, u: f64, p: MarginalParams) -> f64 {
        let dry = 1.0 - p.p_wet;
        if u <= dry || p.p_wet <= 0.0 {
            return 0.0;
        }
        let q = ((u - dry) / p.p_wet).min(1.0 - 1e-16);
        let x = p.scale * (-(1.0 - q).ln()).powf(1.0 / p.shape);
        let r = self.config.resolution;
        (x / r).round() * r
    }

    fn draw_field<R: Rng + ?Sized>(&self, rng: &mut R, p: MarginalParams, t: i64, lead: u32) -> Result<GridField> {
        let n = self.spec.n_cells();
        let eps = nalgebra::DVector::from_fn(n, |_, _| std_normal(rng));
        let z = &self.chol * eps;
        let values = ndarray::Array2::from_shape_fn((self.spec.n_rows, self.spec.n_cols), |(r, c)| {
            self.amount(norm_cdf(z[r * self.spec.n_cols + c]), p)
        });
        GridField::new(self.spec, values, t, lead)
    }
}

fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    norm_quantile(rng.random_range(f64::MIN_POSITIVE..1.0))
}

impl Dataset for SyntheticDataset {
    fn spec(&self) -> GridSpec {
        self.spec
    }

    fn observations(&self) -> &[GridField] {
        &self.observations
    }

    fn forecast(&self, valid_time: i64, lead_time_h: u32) -> Result<Option<QuantileForecast>> {
        let Some(h) = self.hour_index(valid_time) else {
            return Ok(None);
        };
        let c = &self.config;
        let p = self.params(h, c.mode == ForecastMode::Miscalibrated);
        let q: Vec<f64> = alpha_levels(c.n_quantiles, c.alpha_min, c.alpha_max)
            .into_iter()
            .map(|a| self.amount(a, p))
            .collect();
        let values = q.repeat(self.spec.n_cells());
        let mut fc = QuantileForecast::new(self.spec, valid_time, lead_time_h, c.n_quantiles, values)?;
        fc.alpha_min = c.alpha_min;
        fc.alpha_max = c.alpha_max;
        Ok(Some(fc))
    }

    /// Members drawn like the truth given the same regime, so in calibrated
    /// mode they are exchangeable with the observation.
    fn reference(&self, valid_time: i64, lead_time_h: u32) -> Result<Option<Vec<GridField>>> {
        let Some(h) = self.hour_index(valid_time) else {
            return Ok(None);
        };
        if self.config.reference_members == 0 {
            return Ok(None);
        }
        let p = self.params(h, self.config.mode == ForecastMode::Miscalibrated);
        let mut rng = substream(self.seed, "reference", &[valid_time, i64::from(lead_time_h)]);
        (0..self.config.reference_members)
            .map(|_| self.draw_field(&mut rng, p, valid_time, lead_time_h))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}
