//! Bivariate copulas: CDF, density, h-functions and their inverses,
//! Kendall-tau parameter inversion, and the 2-dimensional discrete sieve.

mod families;
pub(crate) mod fit;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::PitPair;
use crate::stats::{bvn_lower, integrate, norm_quantile};

pub use fit::{fit_bicop, fit_pseudo_observations, jitter, BicopFitOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Independence,
    Gaussian,
    Clayton,
    Gumbel,
    Frank,
}

impl FamilyKind {
    fn name(&self) -> &'static str {
        match self {
            FamilyKind::Independence => "independence",
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Clayton => "clayton",
            FamilyKind::Gumbel => "gumbel",
            FamilyKind::Frank => "frank",
        }
    }

    /// Only the asymmetric families take rotations.
    pub fn rotatable(&self) -> bool {
        matches!(self, FamilyKind::Clayton | FamilyKind::Gumbel)
    }
}

/// Counter-clockwise rotation of the copula density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl TryFrom<u16> for Rotation {
    type Error = String;
    fn try_from(d: u16) -> std::result::Result<Self, String> {
        match d {
            0 => Ok(Rotation::R0),
            90 => Ok(Rotation::R90),
            180 => Ok(Rotation::R180),
            270 => Ok(Rotation::R270),
            _ => Err(format!("rotation must be 0, 90, 180 or 270, got {d}")),
        }
    }
}

impl From<Rotation> for u16 {
    fn from(r: Rotation) -> u16 {
        match r {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }
}

impl Rotation {
    /// 90° and 270° rotations turn positive into negative dependence.
    fn flips_sign(&self) -> bool {
        matches!(self, Rotation::R90 | Rotation::R270)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BicopFamily {
    kind: FamilyKind,
    rotation: Rotation,
}

impl BicopFamily {
    pub fn new(kind: FamilyKind, rotation: Rotation) -> Result<Self> {
        if rotation != Rotation::R0 && !kind.rotatable() {
            return Err(Error::ParameterDomain {
                family: kind.name().into(),
                reason: format!("rotation {}° is only defined for clayton and gumbel", u16::from(rotation)),
            });
        }
        Ok(Self { kind, rotation })
    }

    pub const INDEPENDENCE: Self = Self::plain(FamilyKind::Independence);
    pub const GAUSSIAN: Self = Self::plain(FamilyKind::Gaussian);
    pub const FRANK: Self = Self::plain(FamilyKind::Frank);

    const fn plain(kind: FamilyKind) -> Self {
        Self {
            kind,
            rotation: Rotation::R0,
        }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn rotation(&self) -> Rotation {
        self.rotation
    }
}

impl fmt::Display for BicopFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rotation == Rotation::R0 {
            write!(f, "{}", self.kind.name())
        } else {
            write!(f, "{}{}", self.kind.name(), u16::from(self.rotation))
        }
    }
}

/// Which argument an h-function conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HDirection {
    /// h₁(u|v) = ∂C/∂v = P(U ≤ u | V = v).
    One,
    /// h₂(v|u) = ∂C/∂u = P(V ≤ v | U = u).
    Two,
}

/// A parametrised bivariate copula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BicopRepr", into = "BicopRepr")]
pub struct BicopModel {
    family: BicopFamily,
    theta: f64,
    fitted_tau: f64,
    aic: f64,
}

#[derive(Serialize, Deserialize)]
struct BicopRepr {
    family: FamilyKind,
    rotation: Rotation,
    theta: f64,
    tau: f64,
    aic: f64,
}

impl TryFrom<BicopRepr> for BicopModel {
    type Error = Error;
    fn try_from(r: BicopRepr) -> Result<Self> {
        let mut m = BicopModel::new(BicopFamily::new(r.family, r.rotation)?, r.theta)?;
        m.aic = r.aic;
        m.fitted_tau = r.tau;
        Ok(m)
    }
}

impl From<BicopModel> for BicopRepr {
    fn from(m: BicopModel) -> Self {
        BicopRepr {
            family: m.family.kind,
            rotation: m.family.rotation,
            theta: m.theta,
            tau: m.fitted_tau,
            aic: m.aic,
        }
    }
}

/// Keeps evaluations away from the edges of the unit square where
/// quantile transforms diverge.
const EDGE: f64 = 1e-15;

fn interior(x: f64) -> f64 {
    x.clamp(EDGE, 1.0 - EDGE)
}

fn domain_err(family: BicopFamily, reason: impl Into<String>) -> Error {
    Error::ParameterDomain {
        family: family.to_string(),
        reason: reason.into(),
    }
}

impl BicopModel {
    pub fn new(family: BicopFamily, theta: f64) -> Result<Self> {
        let ok = theta.is_finite()
            && match family.kind {
                FamilyKind::Independence => true,
                FamilyKind::Gaussian => theta.abs() < 1.0,
                FamilyKind::Clayton => theta > 0.0,
                FamilyKind::Gumbel => theta >= 1.0,
                FamilyKind::Frank => theta != 0.0,
            };
        if !ok {
            return Err(domain_err(family, format!("theta = {theta} is outside the parameter domain")));
        }
        let theta = if family.kind == FamilyKind::Independence { 0.0 } else { theta };
        Ok(Self {
            family,
            theta,
            fitted_tau: theta_to_tau(family, theta),
            aic: 0.0,
        })
    }

    pub fn independence() -> Self {
        Self {
            family: BicopFamily::INDEPENDENCE,
            theta: 0.0,
            fitted_tau: 0.0,
            aic: 0.0,
        }
    }

    /// Model with the parameter implied by Kendall's tau.
    pub fn from_tau(family: BicopFamily, tau: f64) -> Result<Self> {
        Self::new(family, tau_to_theta(family, tau)?)
    }

    pub(crate) fn with_aic(mut self, aic: f64) -> Self {
        self.aic = aic;
        self
    }

    pub fn family(&self) -> BicopFamily {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Kendall's tau of the fitted model.
    pub fn tau(&self) -> f64 {
        self.fitted_tau
    }

    pub fn aic(&self) -> f64 {
        self.aic
    }

    pub fn is_independence(&self) -> bool {
        self.family.kind == FamilyKind::Independence
    }

    fn base_cdf(&self, u: f64, v: f64) -> f64 {
        families::cdf(self.family.kind, self.theta, u, v)
    }

    /// Copula CDF, exact on the boundary of the unit square.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return v.min(1.0);
        }
        if v >= 1.0 {
            return u;
        }
        let c = match self.family.rotation {
            Rotation::R0 => self.base_cdf(u, v),
            Rotation::R90 => v - self.base_cdf(1.0 - u, v),
            Rotation::R180 => u + v - 1.0 + self.base_cdf(1.0 - u, 1.0 - v),
            Rotation::R270 => u - self.base_cdf(u, 1.0 - v),
        };
        c.clamp((u + v - 1.0).max(0.0), u.min(v))
    }

    pub fn log_pdf(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (interior(u), interior(v));
        let (a, b) = match self.family.rotation {
            Rotation::R0 => (u, v),
            Rotation::R90 => (1.0 - u, v),
            Rotation::R180 => (1.0 - u, 1.0 - v),
            Rotation::R270 => (u, 1.0 - v),
        };
        families::log_pdf(self.family.kind, self.theta, a, b)
    }

    pub fn pdf(&self, u: f64, v: f64) -> f64 {
        self.log_pdf(u, v).exp()
    }

    /// P(U ≤ u | V = v).
    pub fn h1(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let v = interior(v);
        let (k, t) = (self.family.kind, self.theta);
        match self.family.rotation {
            Rotation::R0 => families::h1(k, t, u, v),
            Rotation::R90 => 1.0 - families::h1(k, t, 1.0 - u, v),
            Rotation::R180 => 1.0 - families::h1(k, t, 1.0 - u, 1.0 - v),
            Rotation::R270 => families::h1(k, t, u, 1.0 - v),
        }
    }

    /// P(V ≤ v | U = u).
    pub fn h2(&self, u: f64, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        if v >= 1.0 {
            return 1.0;
        }
        let u = interior(u);
        let (k, t) = (self.family.kind, self.theta);
        // Base families are exchangeable: P(V ≤ v | U = u) = h1(v, u).
        match self.family.rotation {
            Rotation::R0 => families::h1(k, t, v, u),
            Rotation::R90 => families::h1(k, t, v, 1.0 - u),
            Rotation::R180 => 1.0 - families::h1(k, t, 1.0 - v, 1.0 - u),
            Rotation::R270 => 1.0 - families::h1(k, t, 1.0 - v, u),
        }
    }

    pub fn hfunc(&self, u: f64, v: f64, direction: HDirection) -> f64 {
        match direction {
            HDirection::One => self.h1(u, v),
            HDirection::Two => self.h2(u, v),
        }
    }

    /// Solves h1(u, v) = w for u.
    pub fn hinv1(&self, w: f64, v: f64) -> f64 {
        let (w, v) = (interior(w), interior(v));
        let (k, t) = (self.family.kind, self.theta);
        match self.family.rotation {
            Rotation::R0 => families::hinv1(k, t, w, v),
            Rotation::R90 => 1.0 - families::hinv1(k, t, 1.0 - w, v),
            Rotation::R180 => 1.0 - families::hinv1(k, t, 1.0 - w, 1.0 - v),
            Rotation::R270 => families::hinv1(k, t, w, 1.0 - v),
        }
    }

    /// Solves h2(u, v) = w for v.
    pub fn hinv2(&self, w: f64, u: f64) -> f64 {
        let (w, u) = (interior(w), interior(u));
        let (k, t) = (self.family.kind, self.theta);
        match self.family.rotation {
            Rotation::R0 => families::hinv1(k, t, w, u),
            Rotation::R90 => families::hinv1(k, t, w, 1.0 - u),
            Rotation::R180 => 1.0 - families::hinv1(k, t, 1.0 - w, 1.0 - u),
            Rotation::R270 => 1.0 - families::hinv1(k, t, 1.0 - w, u),
        }
    }

    /// `[C(a,b), C(a⁻,b), C(a,b⁻), C(a⁻,b⁻)]`, sharing quantile transforms
    /// for the Gaussian family.
    pub fn cdf_box(&self, a: f64, am: f64, b: f64, bm: f64) -> [f64; 4] {
        match self.family.kind {
            FamilyKind::Gaussian => {}
            FamilyKind::Independence => return [a * b, am * b, a * bm, am * bm].map(|c| c.max(0.0)),
            _ => return self.cdf_box_closed(a, am, b, bm),
        }
        let rho = self.theta;
        let q = |x: f64| if x > 0.0 && x < 1.0 { norm_quantile(x) } else { 0.0 };
        let (qa, qam, qb, qbm) = (q(a), q(am), q(b), q(bm));
        let c = |u: f64, qu: f64, v: f64, qv: f64| {
            if u <= 0.0 || v <= 0.0 {
                0.0
            } else if u >= 1.0 {
                v.min(1.0)
            } else if v >= 1.0 {
                u
            } else {
                bvn_lower(qu, qv, rho).clamp((u + v - 1.0).max(0.0), u.min(v))
            }
        };
        [c(a, qa, b, qb), c(am, qam, b, qb), c(a, qa, bm, qbm), c(am, qam, bm, qbm)]
    }

    fn cdf_box_closed(&self, a: f64, am: f64, b: f64, bm: f64) -> [f64; 4] {
        let (us, vs) = ([a, am], [b, bm]);
        let flip = |x: [f64; 2]| x.map(|t| 1.0 - t);
        let rot = self.family.rotation;
        let (gu, gv) = match rot {
            Rotation::R0 => (us, vs),
            Rotation::R90 => (flip(us), vs),
            Rotation::R180 => (flip(us), flip(vs)),
            Rotation::R270 => (us, flip(vs)),
        };
        let g = families::cdf_grid(self.family.kind, self.theta, gu, gv);
        let corner = |i: usize, j: usize| {
            let (u, v) = (us[i], vs[j]);
            if u <= 0.0 || v <= 0.0 {
                return 0.0;
            }
            if u >= 1.0 {
                return v.min(1.0);
            }
            if v >= 1.0 {
                return u;
            }
            let c = match rot {
                Rotation::R0 => g[i][j],
                Rotation::R90 => v - g[i][j],
                Rotation::R180 => u + v - 1.0 + g[i][j],
                Rotation::R270 => u - g[i][j],
            };
            c.clamp((u + v - 1.0).max(0.0), u.min(v))
        };
        [corner(0, 0), corner(1, 0), corner(0, 1), corner(1, 1)]
    }

    /// Rectangle probability P(U ∈ (u⁻, u], V ∈ (v⁻, v]).
    pub fn pmf_sieve(&self, pu: PitPair, pv: PitPair) -> f64 {
        let [c11, c01, c10, c00] = self.cdf_box(pu.u, pu.u_minus, pv.u, pv.u_minus);
        (c11 - c01 - c10 + c00).max(0.0)
    }
}

/// Kendall's tau of a family at parameter `theta`.
pub fn theta_to_tau(family: BicopFamily, theta: f64) -> f64 {
    let base = match family.kind {
        FamilyKind::Independence => 0.0,
        FamilyKind::Gaussian => 2.0 / PI * theta.asin(),
        FamilyKind::Clayton => theta / (theta + 2.0),
        FamilyKind::Gumbel => 1.0 - 1.0 / theta,
        FamilyKind::Frank => frank_tau(theta),
    };
    if family.rotation.flips_sign() {
        -base
    } else {
        base
    }
}

/// Inverts Kendall's tau to the family parameter.
///
/// Independence has no parameter and returns 0 for every tau in (-1, 1).
pub fn tau_to_theta(family: BicopFamily, tau: f64) -> Result<f64> {
    if !(tau > -1.0 && tau < 1.0) {
        return Err(domain_err(family, format!("tau = {tau} must lie in (-1, 1)")));
    }
    let t = if family.rotation.flips_sign() { -tau } else { tau };
    match family.kind {
        FamilyKind::Independence => Ok(0.0),
        FamilyKind::Gaussian => Ok((PI * tau / 2.0).sin()),
        FamilyKind::Clayton if t > 0.0 => Ok(2.0 * t / (1.0 - t)),
        FamilyKind::Gumbel if t >= 0.0 => Ok(1.0 / (1.0 - t)),
        FamilyKind::Frank if t != 0.0 => Ok(frank_theta(t)),
        _ => Err(domain_err(family, format!("tau = {tau} is not attainable"))),
    }
}

/// Debye function of order one, D₁(x) = (1/x) ∫₀ˣ t/(eᵗ−1) dt, for x > 0.
fn debye1(x: f64) -> f64 {
    let panels = (x / 2.0).ceil().max(1.0) as usize;
    integrate(|t| if t == 0.0 { 1.0 } else { t / t.exp_m1() }, 0.0, x, panels) / x
}

fn frank_tau(theta: f64) -> f64 {
    let a = theta.abs();
    let tau = if a < 1e-2 {
        a / 9.0 - a.powi(3) / 900.0 + a.powi(5) / 52_920.0
    } else {
        1.0 - 4.0 / a + 4.0 * debye1(a) / a
    };
    tau.copysign(theta)
}

fn frank_theta(tau: f64) -> f64 {
    let target = tau.abs();
    let mut hi = 1.0;
    while frank_tau(hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frank_tau(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    (0.5 * (lo + hi)).copysign(tau)
}
