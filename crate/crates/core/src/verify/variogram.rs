//! Empirical semivariogram and exponential model fit.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fraction of the sill defining the effective range.
pub const RANGE_FRACTION: f64 = 0.95;
const GRID_POINTS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramFit {
    pub nugget: f64,
    pub sill: f64,
    /// Exponential range parameter a; NaN for the degenerate fit.
    pub range_param: f64,
    /// `None` for the degenerate fit.
    pub effective_range: Option<f64>,
    /// Sum of squared residuals at the empirical lags.
    pub residual: f64,
}

impl VariogramFit {
    /// Fit of a constant field.
    pub const DEGENERATE: Self = Self {
        nugget: 0.0,
        sill: 0.0,
        range_param: f64::NAN,
        effective_range: None,
        residual: 0.0,
    };

    pub fn is_degenerate(&self) -> bool {
        self.effective_range.is_none()
    }

    /// γ(h) of the fitted model.
    pub fn gamma(&self, h: f64) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        self.nugget + (self.sill - self.nugget) * (1.0 - (-h / self.range_param).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalLag {
    pub lag: f64,
    pub gamma: f64,
    pub pairs: usize,
}

/// Classical estimator over axis-aligned pairs, lags 1..=max(rows, cols)−1.
pub fn empirical_variogram(field: ArrayView2<'_, f64>) -> Vec<EmpiricalLag> {
    let (nr, nc) = field.dim();
    let max_lag = nr.max(nc).saturating_sub(1);
    (1..=max_lag)
        .filter_map(|h| {
            let (mut sum, mut pairs) = (0.0, 0usize);
            for r in 0..nr {
                for c in 0..nc {
                    if c + h < nc {
                        sum += 0.5 * (field[[r, c]] - field[[r, c + h]]).powi(2);
                        pairs += 1;
                    }
                    if r + h < nr {
                        sum += 0.5 * (field[[r, c]] - field[[r + h, c]]).powi(2);
                        pairs += 1;
                    }
                }
            }
            (pairs > 0).then(|| EmpiricalLag {
                lag: h as f64,
                gamma: sum / pairs as f64,
                pairs,
            })
        })
        .collect()
}

/// Least squares (nugget, partial sill) >= 0 for fixed a, with the residual.
fn nnls(lags: &[f64], gamma: &[f64], a: f64) -> (f64, f64, f64) {
    let f: Vec<f64> = lags.iter().map(|&h| 1.0 - (-h / a).exp()).collect();
    let n = lags.len() as f64;
    let (sf, sff) = (f.iter().sum::<f64>(), f.iter().map(|x| x * x).sum::<f64>());
    let (sg, sfg) = (gamma.iter().sum::<f64>(), f.iter().zip(gamma).map(|(x, g)| x * g).sum::<f64>());
    let ssr = |c0: f64, c1: f64| -> f64 { f.iter().zip(gamma).map(|(x, g)| (g - c0 - c1 * x).powi(2)).sum() };
    let mut candidates = Vec::with_capacity(4);
    let det = n * sff - sf * sf;
    if det.abs() > 1e-14 * n * sff {
        let c0 = (sff * sg - sf * sfg) / det;
        let c1 = (n * sfg - sf * sg) / det;
        if c0 >= 0.0 && c1 >= 0.0 {
            candidates.push((c0, c1));
        }
    }
    candidates.push((0.0, if sff > 0.0 { (sfg / sff).max(0.0) } else { 0.0 }));
    candidates.push(((sg / n).max(0.0), 0.0));
    candidates
        .into_iter()
        .map(|(c0, c1)| (c0, c1, ssr(c0, c1)))
        .min_by(|x, y| x.2.total_cmp(&y.2))
        .expect("boundary candidates are always present")
}

/// Fits γ(h) = nugget + psill·(1 − e^{−h/a}) to (lag, γ) pairs with a in `a_bounds`.
pub fn fit_exponential(lags: &[f64], gamma: &[f64], a_bounds: (f64, f64)) -> Result<VariogramFit> {
    if lags.is_empty() || lags.len() != gamma.len() {
        return Err(Error::InvalidInput("variogram fit needs matching, non-empty lags".into()));
    }
    let (lo, hi) = a_bounds;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidInput(format!("invalid range bounds ({lo}, {hi})")));
    }
    if gamma.iter().all(|&g| g == 0.0) {
        return Ok(VariogramFit::DEGENERATE);
    }
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (GRID_POINTS - 1) as f64).exp())
        .collect();
    let obj = |a: f64| nnls(lags, gamma, a).2;
    let (best_i, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &a)| (i, obj(a)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap();
    // Golden-section in log a between the grid neighbours.
    let (mut x0, mut x3) = (grid[best_i.saturating_sub(1)].ln(), grid[(best_i + 1).min(GRID_POINTS - 1)].ln());
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = x3 - g * (x3 - x0);
    let mut x2 = x0 + g * (x3 - x0);
    let (mut f1, mut f2) = (obj(x1.exp()), obj(x2.exp()));
    while x3 - x0 > 1e-12 {
        if f1 <= f2 {
            x3 = x2;
            x2 = x1;
            f2 = f1;
            x1 = x3 - g * (x3 - x0);
            f1 = obj(x1.exp());
        } else {
            x0 = x1;
            x1 = x2;
            f1 = f2;
            x2 = x0 + g * (x3 - x0);
            f2 = obj(x2.exp());
        }
    }
    let refined = if f1 <= f2 { x1.exp() } else { x2.exp() };
    let a = if obj(refined) <= obj(grid[best_i]) { refined } else { grid[best_i] };
    let (nugget, psill, residual) = nnls(lags, gamma, a);
    let sill = nugget + psill;
    let effective_range = if nugget >= RANGE_FRACTION * sill || psill <= 0.0 {
        0.0
    } else {
        -a * ((1.0 - RANGE_FRACTION) * sill / psill).ln()
    };
    Ok(VariogramFit {
        nugget,
        sill,
        range_param: a,
        effective_range: Some(effective_range),
        residual,
    })
}

/// Empirical variogram of `field` fitted with a in \[1, max lag\].
pub fn fit_variogram(field: ArrayView2<'_, f64>) -> Result<VariogramFit> {
    let (nr, nc) = field.dim();
    if nr < 3 || nc < 3 {
        return Err(Error::InvalidInput(format!("variogram needs at least 3x3 cells, got {nr}x{nc}")));
    }
    let emp = empirical_variogram(field);
    let lags: Vec<f64> = emp.iter().map(|e| e.lag).collect();
    let gamma: Vec<f64> = emp.iter().map(|e| e.gamma).collect();
    fit_exponential(&lags, &gamma, (1.0, nr.max(nc) as f64 - 1.0))
}
