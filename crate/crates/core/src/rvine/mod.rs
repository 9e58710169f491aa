//! Regular-vine copulas on discrete data: structure, fitting, log-mass
//! evaluation, sampling and model files.

mod eval;
mod fit;
mod sample;
mod structure;

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bicop::{BicopFitOptions, BicopModel};
use crate::error::{Error, Result};
use crate::grid::{Area, GridField};
use crate::marginals::{MarginalCdf, PitPair, DEFAULT_RESOLUTION};

use eval::EvalPlan;
pub use eval::{Delta, VineEvaluator, LOG_ZERO_SENTINEL};
pub use fit::{fit_copula, select_structure, CopulaFitOptions, MIN_FIT_ROWS};
pub use structure::{maximum_spanning_tree, RVineStructure, VineEdge};

/// Vine structure with one pair copula per stored edge. Trees above the
/// truncation level are independence.
#[derive(Debug, Clone)]
pub struct RVineCopula {
    structure: RVineStructure,
    pair_models: Vec<Vec<BicopModel>>,
    plan: EvalPlan,
}

impl PartialEq for RVineCopula {
    fn eq(&self, other: &Self) -> bool {
        self.structure == other.structure && self.pair_models == other.pair_models
    }
}

impl RVineCopula {
    pub fn new(structure: RVineStructure, pair_models: Vec<Vec<BicopModel>>) -> Result<Self> {
        if pair_models.len() != structure.truncation()
            || pair_models.iter().zip(structure.trees()).any(|(p, t)| p.len() != t.len())
        {
            return Err(Error::InvalidInput("one pair model per vine edge is required".into()));
        }
        let plan = EvalPlan::new(&structure, &pair_models);
        Ok(Self {
            structure,
            pair_models,
            plan,
        })
    }

    /// Independence copula in `m` dimensions.
    pub fn independence(m: usize) -> Self {
        Self::new(RVineStructure::empty(m), Vec::new()).expect("empty vine is valid")
    }

    pub fn fit(rows: &[Vec<PitPair>], opts: &CopulaFitOptions) -> Result<Self> {
        let (s, p) = fit_copula(rows, opts)?;
        Self::new(s, p)
    }

    pub fn structure(&self) -> &RVineStructure {
        &self.structure
    }

    pub fn pair_models(&self) -> &[Vec<BicopModel>] {
        &self.pair_models
    }

    pub fn m(&self) -> usize {
        self.structure.m()
    }

    pub fn truncation(&self) -> usize {
        self.structure.truncation()
    }

    /// Keeps trees 1..=t.
    pub fn truncated(&self, t: usize) -> Self {
        let t = t.min(self.truncation());
        Self::new(self.structure.truncated(t), self.pair_models[..t].to_vec()).expect("prefix of a valid vine")
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                got,
            });
        }
        Ok(())
    }

    /// Discrete log-mass of PIT pairs, including the marginal masses.
    pub fn log_pmf_pits(&self, pits: &[PitPair]) -> Result<f64> {
        self.check_dim(pits.len())?;
        Ok(eval::log_pmf_pits(&self.plan, pits))
    }

    /// Continuous copula log-density at `u` ∈ (0,1)^m.
    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        self.check_dim(u.len())?;
        Ok(eval::log_density_continuous(&self.plan, u))
    }

    /// Incremental evaluator for coordinate-wise changes.
    pub fn evaluator(&self) -> VineEvaluator<'_> {
        VineEvaluator::new(&self.plan)
    }

    /// `n` draws from the copula, each an m-vector in (0,1).
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        sample::sample(&self.structure, &self.pair_models, n, rng)
    }
}

/// Pooled observation vectors: one row per area-hour, one column per
/// gridpoint role (row-major within the area).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub values: Array2<f64>,
    pub timestamps: Vec<i64>,
}

impl TrainingSet {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn m(&self) -> usize {
        self.values.ncols()
    }
}

/// Flattens every area of every field into a training row. `areas[k]`
/// lists the areas placed on `fields[k]`.
pub fn assemble_training_set(fields: &[&GridField], areas: &[Vec<Area>]) -> Result<TrainingSet> {
    if fields.len() != areas.len() {
        return Err(Error::DimensionMismatch {
            expected: fields.len(),
            got: areas.len(),
        });
    }
    let side = areas.iter().flatten().map(|a| a.side).next();
    let Some(side) = side else {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    };
    let m = side * side;
    let n: usize = areas.iter().map(Vec::len).sum();
    let mut values = Array2::zeros((n, m));
    let mut timestamps = Vec::with_capacity(n);
    let mut r = 0;
    for (f, list) in fields.iter().zip(areas) {
        for a in list {
            if a.side != side {
                return Err(Error::InvalidInput("all areas must share one side length".into()));
            }
            if !a.fits(&f.spec()) {
                return Err(Error::InvalidInput(format!("area {a:?} lies outside its field")));
            }
            for (slot, v) in values.row_mut(r).iter_mut().zip(f.slice(a).iter()) {
                *slot = *v;
            }
            timestamps.push(f.timestamp);
            r += 1;
        }
    }
    Ok(TrainingSet { values, timestamps })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VineFitOptions {
    pub truncation: usize,
    pub seed: u64,
    pub resolution: f64,
    /// Share one marginal across all gridpoint roles.
    pub pooled_marginals: bool,
    pub bicop: BicopFitOptions,
}

impl Default for VineFitOptions {
    fn default() -> Self {
        Self {
            truncation: 5,
            seed: 0,
            resolution: DEFAULT_RESOLUTION,
            pooled_marginals: false,
            bicop: BicopFitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub window_id: String,
    /// Distinct training timestamps, ascending.
    pub timestamps: Vec<i64>,
    pub n_rows: usize,
    pub seed: u64,
    pub pooled_marginals: bool,
}

/// Vine copula plus per-role discrete marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct FittedRVine {
    copula: RVineCopula,
    marginals: Vec<MarginalCdf>,
    meta: FitMeta,
}

pub const MODEL_SCHEMA: &str = "vineshuffle.rvine.v1";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema: String,
    m: usize,
    truncation: usize,
    trees: Vec<Vec<VineEdge>>,
    pair_models: Vec<Vec<BicopModel>>,
    marginals: Vec<MarginalCdf>,
    meta: FitMeta,
}

impl TryFrom<ModelFile> for FittedRVine {
    type Error = Error;
    fn try_from(f: ModelFile) -> Result<Self> {
        if f.schema != MODEL_SCHEMA {
            return Err(Error::InvalidInput(format!("unsupported model schema '{}'", f.schema)));
        }
        let structure = RVineStructure::new(f.m, f.trees)?;
        if structure.truncation() != f.truncation {
            return Err(Error::InvalidInput("truncation does not match the stored trees".into()));
        }
        FittedRVine::new(RVineCopula::new(structure, f.pair_models)?, f.marginals, f.meta)
    }
}

impl From<FittedRVine> for ModelFile {
    fn from(v: FittedRVine) -> Self {
        ModelFile {
            schema: MODEL_SCHEMA.into(),
            m: v.copula.m(),
            truncation: v.copula.truncation(),
            trees: v.copula.structure.trees().to_vec(),
            pair_models: v.copula.pair_models,
            marginals: v.marginals,
            meta: v.meta,
        }
    }
}

impl FittedRVine {
    pub fn new(copula: RVineCopula, marginals: Vec<MarginalCdf>, meta: FitMeta) -> Result<Self> {
        if marginals.len() != copula.m() {
            return Err(Error::DimensionMismatch {
                expected: copula.m(),
                got: marginals.len(),
            });
        }
        Ok(Self { copula, marginals, meta })
    }

    /// Fits marginals, transforms to PIT pairs and fits the copula.
    pub fn fit(training: &TrainingSet, opts: &VineFitOptions, window_id: &str) -> Result<Self> {
        let m = training.m();
        if training.n_rows() == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let marginals: Vec<MarginalCdf> = if opts.pooled_marginals {
            let all: Vec<f64> = training.values.iter().copied().collect();
            vec![MarginalCdf::fit(&all, opts.resolution)?; m]
        } else {
            (0..m)
                .map(|i| MarginalCdf::fit(&training.values.column(i).to_vec(), opts.resolution))
                .collect::<Result<_>>()?
        };
        let rows: Vec<Vec<PitPair>> = training
            .values
            .rows()
            .into_iter()
            .map(|r| r.iter().zip(&marginals).map(|(&y, g)| g.pit(y)).collect())
            .collect();
        let copula = RVineCopula::fit(
            &rows,
            &CopulaFitOptions {
                truncation: opts.truncation,
                seed: opts.seed,
                bicop: opts.bicop,
            },
        )?;
        let stamps: BTreeSet<i64> = training.timestamps.iter().copied().collect();
        let meta = FitMeta {
            window_id: window_id.to_string(),
            timestamps: stamps.into_iter().collect(),
            n_rows: training.n_rows(),
            seed: opts.seed,
            pooled_marginals: opts.pooled_marginals,
        };
        Self::new(copula, marginals, meta)
    }

    pub fn copula(&self) -> &RVineCopula {
        &self.copula
    }

    pub fn marginals(&self) -> &[MarginalCdf] {
        &self.marginals
    }

    pub fn meta(&self) -> &FitMeta {
        &self.meta
    }

    pub fn m(&self) -> usize {
        self.copula.m()
    }

    pub fn pits(&self, y: &[f64]) -> Result<Vec<PitPair>> {
        self.copula.check_dim(y.len())?;
        Ok(y.iter().zip(&self.marginals).map(|(&v, g)| g.pit(v)).collect())
    }

    /// Log joint probability mass of an m-vector of amounts (mm).
    pub fn log_pmf(&self, y: &[f64]) -> Result<f64> {
        let pits = self.pits(y)?;
        self.copula.log_pmf_pits(&pits)
    }

    /// Copula draws mapped to amounts through the marginal quantiles.
    pub fn sample_values<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let u = self.copula.sample(n, rng)?;
        Ok(u.into_iter()
            .map(|row| row.iter().zip(&self.marginals).map(|(&x, g)| g.quantile(x)).collect())
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec(self)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::format(path.display(), e.to_string()))
    }
}

#[cfg(test)]
mod tests;
