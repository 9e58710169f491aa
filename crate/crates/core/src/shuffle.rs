//! Rearranging per-gridpoint samples into synthetic ensemble members.

use std::path::{Path, PathBuf};

use log::warn;
use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{read_field, write_field, Area, FieldFormat, GridField, GridSpec};
use crate::marginals::{stratified_sample, PitPair, QuantileForecast};
use crate::rvine::{Delta, FittedRVine, LOG_ZERO_SENTINEL};
use crate::{Error, Result};

/// m×N matrix of amounts (mm); column j is candidate member j.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    x: Array2<f64>,
}

impl SampleMatrix {
    pub fn new(x: Array2<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidInput("sample matrix must be at least 1x1".into()));
        }
        if let Some(((i, j), v)) = x.indexed_iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "sample matrix entry ({i}, {j}) = {v} is not a finite non-negative amount"
            )));
        }
        Ok(Self { x })
    }

    /// Builds from gridpoint rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("ragged sample rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let x = Array2::from_shape_vec((rows.len(), n), flat).expect("shape checked");
        Self::new(x)
    }

    /// Stratified draws of `n` values per gridpoint of `area`, row-major.
    pub fn from_forecast<R: Rng + ?Sized>(forecast: &QuantileForecast, area: &Area, n: usize, rng: &mut R) -> Result<Self> {
        if !area.fits(&forecast.spec) {
            return Err(Error::InvalidInput(format!("area {area:?} outside the forecast grid")));
        }
        let mut rows = Vec::with_capacity(area.m());
        for r in area.row0..area.row0 + area.side {
            for c in area.col0..area.col0 + area.side {
                rows.push(stratified_sample(forecast.gridpoint(r, c), n, rng)?);
            }
        }
        Self::from_rows(&rows)
    }

    pub fn m(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_members(&self) -> usize {
        self.x.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    pub fn member(&self, j: usize) -> Vec<f64> {
        self.x.column(j).to_vec()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.x
    }
}

/// One permutation per gridpoint: arranged\[i\]\[j\] = original\[i\]\[σ_i(j)\].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationSet {
    sigma: Vec<Vec<usize>>,
}

impl PermutationSet {
    pub fn new(sigma: Vec<Vec<usize>>) -> Result<Self> {
        for (i, s) in sigma.iter().enumerate() {
            let mut seen = vec![false; s.len()];
            for &k in s {
                if k >= s.len() || std::mem::replace(&mut seen[k], true) {
                    return Err(Error::InvalidInput(format!("row {i} is not a permutation")));
                }
            }
        }
        Ok(Self { sigma })
    }

    pub fn identity(m: usize, n: usize) -> Self {
        Self {
            sigma: vec![(0..n).collect(); m],
        }
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.sigma
    }

    pub fn apply(&self, x: &SampleMatrix) -> Result<SampleMatrix> {
        if self.sigma.len() != x.m() {
            return Err(Error::DimensionMismatch {
                expected: x.m(),
                got: self.sigma.len(),
            });
        }
        if let Some(s) = self.sigma.iter().find(|s| s.len() != x.n_members()) {
            return Err(Error::DimensionMismatch {
                expected: x.n_members(),
                got: s.len(),
            });
        }
        let out = Array2::from_shape_fn(x.x.dim(), |(i, j)| x.x[[i, self.sigma[i][j]]]);
        Ok(SampleMatrix { x: out })
    }
}

fn check_model(x: &SampleMatrix, model: &FittedRVine) -> Result<()> {
    if x.m() != model.m() {
        return Err(Error::DimensionMismatch {
            expected: model.m(),
            got: x.m(),
        });
    }
    Ok(())
}

/// Log-mass of every member.
pub fn member_log_masses(x: &SampleMatrix, model: &FittedRVine) -> Result<Vec<f64>> {
    check_model(x, model)?;
    (0..x.n_members()).map(|j| model.log_pmf(&x.member(j))).collect()
}

/// Σ_j log g(x⁽ʲ⁾); a vanished member contributes the sentinel.
pub fn log_likelihood(x: &SampleMatrix, model: &FittedRVine) -> Result<f64> {
    Ok(member_log_masses(x, model)?.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillClimbOptions {
    /// Passes per member before giving up with a warning.
    pub pass_cap: usize,
    /// Keep every accepted swap in the log.
    pub record_swaps: bool,
}

impl Default for HillClimbOptions {
    fn default() -> Self {
        Self {
            pass_cap: 100,
            record_swaps: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapRecord {
    pub member: usize,
    pub pass: usize,
    pub gridpoint: usize,
    /// Column exchanged with `member`.
    pub with: usize,
    /// Member log-mass after the swap.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberLog {
    pub member: usize,
    pub initial: f64,
    pub final_value: f64,
    pub passes: usize,
    pub swaps: usize,
    pub hit_cap: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClimbLog {
    pub members: Vec<MemberLog>,
    pub swaps: Vec<SwapRecord>,
    /// Log-likelihood after the random start.
    pub initial_ll: f64,
    pub final_ll: f64,
}

impl ClimbLog {
    /// True if every member's running value never decreased across swaps.
    pub fn is_monotone(&self) -> bool {
        self.members.iter().all(|ml| {
            let mut prev = ml.initial;
            self.swaps.iter().filter(|s| s.member == ml.member).all(|s| {
                let ok = s.value >= prev;
                prev = s.value;
                ok
            })
        })
    }
}

#[derive(Debug, Clone)]
pub struct Shuffled {
    pub matrix: SampleMatrix,
    pub permutations: PermutationSet,
    pub log: ClimbLog,
}

/// Log-space margin below which two candidates count as tied, so that
/// round-off between equal masses never triggers a swap.
pub const TIE_TOLERANCE: f64 = 1e-10;

fn better(d: Delta, best: Delta) -> bool {
    d.zeros < best.zeros || (d.zeros == best.zeros && d.sum > best.sum + TIE_TOLERANCE)
}

/// Greedy member-by-member rearrangement maximizing the vine log-mass,
/// starting from independent random row permutations.
///
/// Member j scans gridpoints in a fresh random order each pass and takes
/// the best value among columns j..N; earlier members stay frozen. Ties keep
/// the current value.
pub fn hill_climb<R: Rng + ?Sized>(
    x: &SampleMatrix,
    model: &FittedRVine,
    opts: &HillClimbOptions,
    rng: &mut R,
) -> Result<Shuffled> {
    check_model(x, model)?;
    let (m, n) = (x.m(), x.n_members());
    if n < 2 {
        return Err(Error::InvalidInput("hill climbing needs at least 2 members".into()));
    }
    let mut sigma: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            let mut s: Vec<usize> = (0..n).collect();
            s.shuffle(rng);
            s
        })
        .collect();
    let mut vals = Array2::from_shape_fn((m, n), |(i, j)| x.x[[i, sigma[i][j]]]);
    let margs = model.marginals();
    let mut pits: Vec<Vec<PitPair>> = (0..m).map(|i| (0..n).map(|j| margs[i].pit(vals[[i, j]])).collect()).collect();

    let copula = model.copula();
    let member_value = |pits: &[Vec<PitPair>], j: usize| {
        let col: Vec<PitPair> = pits.iter().map(|r| r[j]).collect();
        copula.log_pmf_pits(&col).expect("dimension checked")
    };
    let mut log = ClimbLog {
        initial_ll: (0..n).map(|j| member_value(&pits, j)).sum(),
        ..Default::default()
    };

    let mut ev = copula.evaluator();
    let mut order: Vec<usize> = (0..m).collect();
    let mut col = vec![pits[0][0]; m];
    let mut seen: Vec<(PitPair, Delta)> = Vec::with_capacity(n);
    for j in 0..n {
        for i in 0..m {
            col[i] = pits[i][j];
        }
        ev.reset(&col);
        let mut ml = MemberLog {
            member: j,
            initial: ev.value(),
            final_value: 0.0,
            passes: 0,
            swaps: 0,
            hit_cap: false,
        };
        loop {
            if ml.passes == opts.pass_cap {
                warn!("member {j}: pass cap {} reached, stopping", opts.pass_cap);
                ml.hit_cap = true;
                break;
            }
            ml.passes += 1;
            order.shuffle(rng);
            let mut swapped = false;
            for &p in &order {
                let cur = pits[p][j];
                let mut best = Delta::default();
                let mut best_k = j;
                // Repeated values (dry cells) share one evaluation.
                seen.clear();
                for k in j + 1..n {
                    let cand = pits[p][k];
                    if cand == cur {
                        continue;
                    }
                    let d = match seen.iter().find(|(q, _)| *q == cand) {
                        Some(&(_, d)) => d,
                        None => {
                            let d = ev.delta(p, cand);
                            seen.push((cand, d));
                            d
                        }
                    };
                    if better(d, best) {
                        best = d;
                        best_k = k;
                    }
                }
                if best_k > j {
                    ev.commit(p, pits[p][best_k]);
                    pits[p].swap(j, best_k);
                    sigma[p].swap(j, best_k);
                    let (a, b) = (vals[[p, j]], vals[[p, best_k]]);
                    vals[[p, j]] = b;
                    vals[[p, best_k]] = a;
                    swapped = true;
                    ml.swaps += 1;
                    if opts.record_swaps {
                        log.swaps.push(SwapRecord {
                            member: j,
                            pass: ml.passes,
                            gridpoint: p,
                            with: best_k,
                            value: ev.value(),
                        });
                    }
                }
            }
            if !swapped {
                break;
            }
        }
        // Fresh evaluation removes incremental round-off.
        ml.final_value = member_value(&pits, j);
        log.members.push(ml);
    }
    log.final_ll = log.members.iter().map(|ml| ml.final_value).sum();
    Ok(Shuffled {
        matrix: SampleMatrix { x: vals },
        permutations: PermutationSet { sigma },
        log,
    })
}

/// Removes the last member.
pub fn drop_last(x: &SampleMatrix) -> Result<SampleMatrix> {
    let n = x.n_members();
    if n < 2 {
        return Err(Error::InvalidInput("cannot drop the only member".into()));
    }
    Ok(SampleMatrix {
        x: x.x.slice(ndarray::s![.., ..n - 1]).to_owned(),
    })
}

/// Sorts every row descending, so member 1 holds each gridpoint's maximum.
pub fn sort_arrange(x: &SampleMatrix) -> SampleMatrix {
    let mut out = x.x.clone();
    for mut row in out.rows_mut() {
        let mut v = row.to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        row.assign(&ArrayView1::from(&v));
    }
    SampleMatrix { x: out }
}

/// Independent uniform permutation of every row.
pub fn random_arrange<R: Rng + ?Sized>(x: &SampleMatrix, rng: &mut R) -> SampleMatrix {
    let mut out = x.x.clone();
    for mut row in out.rows_mut() {
        let mut v = row.to_vec();
        v.shuffle(rng);
        row.assign(&ArrayView1::from(&v));
    }
    SampleMatrix { x: out }
}

/// log g(x⁽ʲ⁾) / log g(x⁽¹⁾) per member; values above 1 mean lower quality.
/// NaN when the first member's log-mass is 0 or vanished and differs from
/// member j's.
pub fn member_quality(x: &SampleMatrix, model: &FittedRVine) -> Result<Vec<f64>> {
    let lm = member_log_masses(x, model)?;
    let first = lm[0];
    Ok(lm
        .iter()
        .map(|&v| {
            if v == first {
                1.0
            } else if first == 0.0 || first == LOG_ZERO_SENTINEL || v == LOG_ZERO_SENTINEL {
                f64::NAN
            } else {
                v / first
            }
        })
        .collect())
}

/// Sidecar metadata for a synthetic ensemble file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub timestamp: i64,
    pub lead_time_h: u32,
    pub area_id: usize,
    pub area: Area,
    pub seed: u64,
    pub initial_ll: f64,
    pub final_ll: f64,
    pub total_swaps: usize,
    pub max_passes: usize,
}

impl EnsembleMeta {
    pub fn from_log(log: &ClimbLog, timestamp: i64, lead_time_h: u32, area_id: usize, area: Area, seed: u64) -> Self {
        Self {
            timestamp,
            lead_time_h,
            area_id,
            area,
            seed,
            initial_ll: log.initial_ll,
            final_ll: log.final_ll,
            total_swaps: log.members.iter().map(|m| m.swaps).sum(),
            max_passes: log.members.iter().map(|m| m.passes).max().unwrap_or(0),
        }
    }
}

pub fn ensemble_meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes members as an m×K field plus a JSON sidecar.
pub fn write_ensemble(path: &Path, x: &SampleMatrix, meta: &EnsembleMeta, format: FieldFormat) -> Result<()> {
    let spec = GridSpec::new(x.m(), x.n_members())?;
    let field = GridField::new(spec, x.x.clone(), meta.timestamp, meta.lead_time_h)?;
    write_field(&field, path, format)?;
    let side = ensemble_meta_path(path);
    std::fs::write(&side, serde_json::to_vec_pretty(meta)?).map_err(|e| Error::io(&side, e))
}

pub fn read_ensemble(path: &Path, format: FieldFormat) -> Result<(SampleMatrix, EnsembleMeta)> {
    let field = read_field(path, format)?;
    let side = ensemble_meta_path(path);
    let bytes = std::fs::read(&side).map_err(|e| Error::io(&side, e))?;
    let meta = serde_json::from_slice(&bytes).map_err(|e| Error::format(side.display(), e.to_string()))?;
    Ok((SampleMatrix::new(field.values().to_owned())?, meta))
}
