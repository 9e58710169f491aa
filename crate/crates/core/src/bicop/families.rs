//! Unrotated one-parameter families. Arguments are assumed to lie strictly
//! inside the unit square; boundary handling happens in the model wrapper.
//! All four families are exchangeable, so only the h-function conditioning
//! on the second argument is provided here.

use crate::stats::{bvn_lower, norm_cdf, norm_quantile};

use super::FamilyKind;

fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// ln(u^-θ + v^-θ - 1) without overflow.
fn clayton_log_s(theta: f64, u: f64, v: f64) -> f64 {
    let a = -theta * u.ln();
    let b = -theta * v.ln();
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
}

/// (ln x, ln y, ln s, A) for the Gumbel family, x = -ln u, s = x^θ + y^θ.
fn gumbel_parts(theta: f64, u: f64, v: f64) -> (f64, f64, f64, f64) {
    let lx = (-u.ln()).ln();
    let ly = (-v.ln()).ln();
    let ls = log_sum_exp2(theta * lx, theta * ly);
    (lx, ly, ls, (ls / theta).exp())
}

pub(super) fn cdf(kind: FamilyKind, theta: f64, u: f64, v: f64) -> f64 {
    match kind {
        FamilyKind::Independence => u * v,
        FamilyKind::Gaussian => bvn_lower(norm_quantile(u), norm_quantile(v), theta),
        FamilyKind::Clayton => (-clayton_log_s(theta, u, v) / theta).exp(),
        FamilyKind::Gumbel => (-gumbel_parts(theta, u, v).3).exp(),
        FamilyKind::Frank => {
            let k = (-theta).exp_m1();
            -((-theta * u).exp_m1() * (-theta * v).exp_m1() / k).ln_1p() / theta
        }
    }
}

/// Base CDF on the grid `us` × `vs`, sharing the per-argument transforms.
/// Entries whose argument lies on the boundary are unspecified.
pub(super) fn cdf_grid(kind: FamilyKind, theta: f64, us: [f64; 2], vs: [f64; 2]) -> [[f64; 2]; 2] {
    let fallback = || [0, 1].map(|i| [0, 1].map(|j| cdf(kind, theta, us[i], vs[j])));
    match kind {
        FamilyKind::Clayton => {
            let ta = us.map(|u| -theta * u.ln());
            let tb = vs.map(|v| -theta * v.ln());
            if ta.iter().chain(&tb).any(|&t| !(t < 700.0)) {
                return fallback();
            }
            let (ea, eb) = (ta.map(f64::exp_m1), tb.map(f64::exp_m1));
            [0, 1].map(|i| [0, 1].map(|j| (-(ea[i] + eb[j]).ln_1p() / theta).exp()))
        }
        FamilyKind::Gumbel => {
            let ta = us.map(|u| theta * (-u.ln()).ln());
            let tb = vs.map(|v| theta * (-v.ln()).ln());
            if ta.iter().chain(&tb).any(|&t| !(t < 700.0)) {
                return fallback();
            }
            let (xa, yb) = (ta.map(f64::exp), tb.map(f64::exp));
            [0, 1].map(|i| [0, 1].map(|j| (-(xa[i] + yb[j]).powf(1.0 / theta)).exp()))
        }
        FamilyKind::Frank => {
            let k = (-theta).exp_m1();
            let ea = us.map(|u| (-theta * u).exp_m1());
            let eb = vs.map(|v| (-theta * v).exp_m1());
            [0, 1].map(|i| [0, 1].map(|j| -(ea[i] * eb[j] / k).ln_1p() / theta))
        }
        _ => fallback(),
    }
}

pub(super) fn log_pdf(kind: FamilyKind, theta: f64, u: f64, v: f64) -> f64 {
    match kind {
        FamilyKind::Independence => 0.0,
        FamilyKind::Gaussian => {
            let (x, y) = (norm_quantile(u), norm_quantile(v));
            let r2 = theta * theta;
            let one = 1.0 - r2;
            -0.5 * one.ln() - (r2 * (x * x + y * y) - 2.0 * theta * x * y) / (2.0 * one)
        }
        FamilyKind::Clayton => {
            let ls = clayton_log_s(theta, u, v);
            (1.0 + theta).ln() + (-1.0 - theta) * (u.ln() + v.ln()) - (2.0 + 1.0 / theta) * ls
        }
        FamilyKind::Gumbel => {
            let (lx, ly, ls, a) = gumbel_parts(theta, u, v);
            let (x, y) = (lx.exp(), ly.exp());
            -a + x + y + (theta - 1.0) * (lx + ly) + (-2.0 + 2.0 / theta) * ls + (a + theta - 1.0).ln() - a.ln()
        }
        FamilyKind::Frank => {
            let k = (-theta).exp_m1();
            let denom = k + (-theta * u).exp_m1() * (-theta * v).exp_m1();
            (-theta * k).ln() - theta * (u + v) - 2.0 * denom.abs().ln()
        }
    }
}

/// P(U <= u | V = v) = ∂C/∂v.
pub(super) fn h1(kind: FamilyKind, theta: f64, u: f64, v: f64) -> f64 {
    let h = match kind {
        FamilyKind::Independence => u,
        FamilyKind::Gaussian => {
            let s = (1.0 - theta * theta).sqrt();
            norm_cdf((norm_quantile(u) - theta * norm_quantile(v)) / s)
        }
        FamilyKind::Clayton => {
            let ls = clayton_log_s(theta, u, v);
            ((-theta - 1.0) * v.ln() - (1.0 + 1.0 / theta) * ls).exp()
        }
        FamilyKind::Gumbel => {
            let (_, ly, ls, a) = gumbel_parts(theta, u, v);
            (-a + (1.0 / theta - 1.0) * ls + (theta - 1.0) * ly + ly.exp()).exp()
        }
        FamilyKind::Frank => {
            let k = (-theta).exp_m1();
            let a = (-theta * u).exp_m1();
            (-theta * v).exp() * a / (k + a * (-theta * v).exp_m1())
        }
    };
    h.clamp(0.0, 1.0)
}

/// Inverse of `h1` in its first argument.
pub(super) fn hinv1(kind: FamilyKind, theta: f64, w: f64, v: f64) -> f64 {
    let u = match kind {
        FamilyKind::Independence => w,
        FamilyKind::Gaussian => {
            let s = (1.0 - theta * theta).sqrt();
            norm_cdf(norm_quantile(w) * s + theta * norm_quantile(v))
        }
        FamilyKind::Clayton => {
            let ls = -theta / (1.0 + theta) * (w.ln() + (theta + 1.0) * v.ln());
            let t = ls.exp() - (-theta * v.ln()).exp() + 1.0;
            if t <= 1.0 {
                1.0
            } else {
                (-t.ln() / theta).exp()
            }
        }
        FamilyKind::Gumbel => bisect_h1(kind, theta, w, v),
        FamilyKind::Frank => {
            let k = (-theta).exp_m1();
            let b = (-theta * v).exp_m1();
            let a = w * k / (1.0 + b * (1.0 - w));
            -a.ln_1p() / theta
        }
    };
    u.clamp(0.0, 1.0)
}

fn bisect_h1(kind: FamilyKind, theta: f64, w: f64, v: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h1(kind, theta, mid, v) < w {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
