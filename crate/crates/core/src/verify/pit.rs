//! Rank histograms with randomized tie handling.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::{Error, Result};

/// Bin of `obs` among `members` (0..=K): the number of members strictly
/// below, plus a uniform draw over the range of tied members.
pub fn pit_bin<R: Rng + ?Sized>(obs: f64, members: &[f64], rng: &mut R) -> Result<usize> {
    if members.is_empty() {
        return Err(Error::InvalidInput("PIT needs at least one member".into()));
    }
    if !obs.is_finite() || members.iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidInput("PIT inputs must be finite".into()));
    }
    let below = members.iter().filter(|&&m| m < obs).count();
    let equal = members.iter().filter(|&&m| m == obs).count();
    Ok(if equal == 0 {
        below
    } else {
        below + rng.random_range(0..=equal)
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PitHistogram {
    pub counts: Vec<u64>,
}

impl PitHistogram {
    /// Empty histogram for `k` members (k + 1 bins).
    pub fn new(k: usize) -> Self {
        Self { counts: vec![0; k + 1] }
    }

    pub fn add(&mut self, bin: usize) {
        self.counts[bin] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Pearson χ² statistic and p-value against uniform bins.
    pub fn chi_square(&self) -> (f64, f64) {
        chi_square_uniform(&self.counts)
    }
}

/// Pearson χ² test of `counts` against equal expected frequencies.
pub fn chi_square_uniform(counts: &[u64]) -> (f64, f64) {
    let n: u64 = counts.iter().sum();
    let k = counts.len();
    if n == 0 || k < 2 {
        return (0.0, 1.0);
    }
    let e = n as f64 / k as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let dist = ChiSquared::new((k - 1) as f64).expect("positive degrees of freedom");
    (stat, 1.0 - dist.cdf(stat))
}
