//! Probabilistic scores for binary exceedance forecasts.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn check(p: &[f64], o: &[bool]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidInput("empty forecast group".into()));
    }
    if p.len() != o.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: o.len(),
        });
    }
    if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidInput(format!("forecast probability {bad} outside [0, 1]")));
    }
    Ok(())
}

fn as_f64(o: bool) -> f64 {
    if o {
        1.0
    } else {
        0.0
    }
}

/// Mean squared error of probabilities against 0/1 outcomes.
pub fn brier(p: &[f64], o: &[bool]) -> Result<f64> {
    check(p, o)?;
    Ok(p.iter().zip(o).map(|(&p, &o)| (p - as_f64(o)).powi(2)).sum::<f64>() / p.len() as f64)
}

/// Brier score of a constant forecast `base_rate`.
pub fn brier_constant(base_rate: f64, o: &[bool]) -> Result<f64> {
    brier(&vec![base_rate; o.len()], o)
}

/// 1 − BS/BS_ref; `None` when the reference score is zero.
pub fn bss(bs: f64, bs_ref: f64) -> Option<f64> {
    (bs_ref > 0.0).then(|| 1.0 - bs / bs_ref)
}

/// mean(p) − mean(o).
pub fn bias(p: &[f64], o: &[bool]) -> Result<f64> {
    check(p, o)?;
    let n = p.len() as f64;
    Ok(p.iter().sum::<f64>() / n - o.iter().map(|&o| as_f64(o)).sum::<f64>() / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// `None` for empty bins.
    pub mean_forecast: Option<f64>,
    pub observed_frequency: Option<f64>,
}

/// Equal-width bins on \[0, 1\]; p = 1 falls in the last bin.
pub fn reliability_curve(p: &[f64], o: &[bool], n_bins: usize) -> Result<Vec<ReliabilityBin>> {
    if n_bins == 0 {
        return Err(Error::InvalidInput("reliability curve needs at least one bin".into()));
    }
    if !p.is_empty() {
        check(p, o)?;
    }
    let mut sum_p = vec![0.0; n_bins];
    let mut sum_o = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (&pi, &oi) in p.iter().zip(o) {
        let b = ((pi * n_bins as f64) as usize).min(n_bins - 1);
        sum_p[b] += pi;
        sum_o[b] += as_f64(oi);
        count[b] += 1;
    }
    Ok((0..n_bins)
        .map(|b| {
            let c = count[b];
            ReliabilityBin {
                lower: b as f64 / n_bins as f64,
                upper: (b + 1) as f64 / n_bins as f64,
                count: c,
                mean_forecast: (c > 0).then(|| sum_p[b] / c as f64),
                observed_frequency: (c > 0).then(|| sum_o[b] / c as f64),
            }
        })
        .collect())
}
