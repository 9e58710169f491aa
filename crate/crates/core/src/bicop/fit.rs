use rand::{Rng, RngExt};

use super::{BicopFamily, BicopModel, FamilyKind, Rotation};
use crate::error::{Error, Result};
use crate::marginals::PitPair;
use crate::rng::seeded;
use crate::stats::{kendall_tau, norm_quantile};

/// Minimum number of pairs for a pair-copula fit.
pub const MIN_FIT_ROWS: usize = 30;

const JITTER_EDGE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicopFitOptions {
    /// Independence is chosen outright when |τ̂| falls below this.
    pub independence_tau: f64,
    pub max_gaussian_rho: f64,
    pub max_clayton: f64,
    pub max_gumbel: f64,
    pub max_abs_frank: f64,
}

impl Default for BicopFitOptions {
    fn default() -> Self {
        Self {
            independence_tau: 0.02,
            max_gaussian_rho: 0.9999,
            max_clayton: 28.0,
            max_gumbel: 50.0,
            max_abs_frank: 35.0,
        }
    }
}

/// Continuous pseudo-observations drawn uniformly inside each (u⁻, u].
pub fn jitter<R: Rng + ?Sized>(pits: &[(f64, f64)], rng: &mut R) -> Vec<f64> {
    pits.iter()
        .map(|&(u, um)| {
            let r: f64 = rng.random();
            (um + (u - um) * r).clamp(JITTER_EDGE, 1.0 - JITTER_EDGE)
        })
        .collect()
}

/// Selects a family by AIC on jittered data from the discrete pairs.
pub fn fit_bicop(data: &[(PitPair, PitPair)], seed: u64) -> Result<BicopModel> {
    if data.len() < MIN_FIT_ROWS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_ROWS,
            got: data.len(),
        });
    }
    let mut rng = seeded(seed);
    let a: Vec<(f64, f64)> = data.iter().map(|(p, _)| (p.u, p.u_minus)).collect();
    let b: Vec<(f64, f64)> = data.iter().map(|(_, p)| (p.u, p.u_minus)).collect();
    let x = jitter(&a, &mut rng);
    let y = jitter(&b, &mut rng);
    Ok(fit_pseudo_observations(&x, &y, &BicopFitOptions::default()))
}

fn candidates(tau: f64) -> Vec<BicopFamily> {
    let (r_a, r_b) = if tau > 0.0 {
        (Rotation::R0, Rotation::R180)
    } else {
        (Rotation::R90, Rotation::R270)
    };
    let mut out = vec![BicopFamily::GAUSSIAN];
    for kind in [FamilyKind::Clayton, FamilyKind::Gumbel] {
        for rot in [r_a, r_b] {
            out.push(BicopFamily { kind, rotation: rot });
        }
    }
    out.push(BicopFamily::FRANK);
    out
}

fn clamp_theta(family: BicopFamily, theta: f64, opts: &BicopFitOptions) -> f64 {
    match family.kind {
        FamilyKind::Independence => 0.0,
        FamilyKind::Gaussian => theta.clamp(-opts.max_gaussian_rho, opts.max_gaussian_rho),
        FamilyKind::Clayton => theta.min(opts.max_clayton),
        FamilyKind::Gumbel => theta.min(opts.max_gumbel),
        FamilyKind::Frank => theta.clamp(-opts.max_abs_frank, opts.max_abs_frank),
    }
}

/// Fits on continuous pseudo-observations in (0,1)²: tau inversion per
/// candidate, then minimum AIC. Independence has AIC 0 and wins ties.
pub fn fit_pseudo_observations(x: &[f64], y: &[f64], opts: &BicopFitOptions) -> BicopModel {
    let tau = kendall_tau(x, y);
    let mut best = BicopModel::independence();
    if tau.abs() < opts.independence_tau || !tau.is_finite() {
        return best;
    }
    let normal = std::cell::OnceCell::new();
    for family in candidates(tau) {
        let Ok(theta) = super::tau_to_theta(family, tau) else {
            continue;
        };
        let Ok(model) = BicopModel::new(family, clamp_theta(family, theta, opts)) else {
            continue;
        };
        let ll: f64 = if family.kind == FamilyKind::Gaussian {
            let (qx, qy): &(Vec<f64>, Vec<f64>) = normal.get_or_init(|| {
                (
                    x.iter().map(|&u| norm_quantile(u)).collect(),
                    y.iter().map(|&v| norm_quantile(v)).collect(),
                )
            });
            gaussian_loglik(model.theta(), qx, qy)
        } else {
            x.iter().zip(y).map(|(&u, &v)| model.log_pdf(u, v)).sum()
        };
        let aic = -2.0 * ll + 2.0;
        if aic.is_finite() && aic < best.aic() {
            best = model.with_aic(aic);
        }
    }
    best
}

fn gaussian_loglik(rho: f64, qx: &[f64], qy: &[f64]) -> f64 {
    let r2 = rho * rho;
    let one = 1.0 - r2;
    let c0 = -0.5 * one.ln();
    qx.iter()
        .zip(qy)
        .map(|(&x, &y)| c0 - (r2 * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * one))
        .sum()
}
