//! Penalised nonlinearity: `g = chi_Lambda f + (1 - chi_Lambda) f~`, where the cut
//! `f~` continues `f(u) = (u+)^p` linearly with slope `alpha/k` beyond the threshold `ell`.

use serde::{Deserialize, Serialize};

use crate::region::BoxRegion;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub region: BoxRegion,
    pub p: f64,
    pub k: f64,
    pub theta: f64,
    pub alpha: f64,
    pub ell: f64,
}

/// Default growth exponent, the midpoint of `(2, p+1)`.
pub fn default_theta(p: f64) -> f64 {
    (p + 3.0) / 2.0
}

/// Default penalty strength `2 theta / (theta - 2)`.
pub fn default_k(theta: f64) -> f64 {
    2.0 * theta / (theta - 2.0)
}

/// `ell` with `ell^{p-1} = alpha / k`.
pub fn penalty_threshold(p: f64, alpha: f64, k: f64) -> Result<f64> {
    if !(alpha > 0.0) || !(k > 0.0) || !(p > 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold needs alpha>0, k>0, p>1 (got alpha={alpha}, k={k}, p={p})"
        )));
    }
    Ok((alpha / k).powf(1.0 / (p - 1.0)))
}

/// Threshold for a general nonlinearity: the root of `f(u)/u = alpha/k`, bracketed
/// by doubling and refined by bisection.
pub fn penalty_threshold_general<F: Fn(f64) -> f64>(f: F, alpha: f64, k: f64) -> Result<f64> {
    if !(alpha > 0.0) || !(k > 0.0) {
        return Err(Error::InvalidInput(format!(
            "threshold needs alpha>0 and k>0 (got alpha={alpha}, k={k})"
        )));
    }
    let target = alpha / k;
    let phi = |u: f64| f(u) / u - target;
    let mut lo = 1e-300_f64.max(f64::MIN_POSITIVE);
    let mut hi = 1.0;
    let mut grown = 0;
    while phi(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        grown += 1;
        if grown > 200 {
            return Err(Error::InvalidInput(
                "f(u)/u never exceeds alpha/k: nonlinearity violates the superlinearity assumption"
                    .into(),
            ));
        }
    }
    if phi(lo) > 0.0 {
        // shrink towards zero until f(u)/u drops below the target
        let mut shrunk = 0;
        while phi(lo) > 0.0 {
            hi = lo;
            lo *= 0.5;
            shrunk += 1;
            if shrunk > 1000 {
                return Err(Error::InvalidInput(
                    "f(u)/u does not vanish at zero: nonlinearity violates the superlinearity assumption".into(),
                ));
            }
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl PenaltyConfig {
    /// Validated configuration with `ell` computed from `p`, `alpha` and `k`.
    pub fn new(region: BoxRegion, p: f64, alpha: f64, theta: f64, k: f64) -> Result<Self> {
        if !(theta > 2.0 && theta < p + 1.0) {
            return Err(Error::Config(format!(
                "theta={theta} must lie in (2, p+1) = (2, {})",
                p + 1.0
            )));
        }
        let kmin = theta / (theta - 2.0);
        if !(k > kmin) {
            return Err(Error::Config(format!(
                "penalty strength k={k} must exceed {kmin}"
            )));
        }
        let ell = penalty_threshold(p, alpha, k)?;
        Ok(Self {
            region,
            p,
            k,
            theta,
            alpha,
            ell,
        })
    }

    /// Default `theta` and `k`.
    pub fn with_defaults(region: BoxRegion, p: f64, alpha: f64) -> Result<Self> {
        let theta = default_theta(p);
        Self::new(region, p, alpha, theta, default_k(theta))
    }

    /// Slope of the cut nonlinearity beyond the threshold.
    pub fn slope(&self) -> f64 {
        self.alpha / self.k
    }

    pub fn inside(&self, x: &[f64]) -> bool {
        self.region.contains(x)
    }

    /// `(g, G, g')` at `(x, u)`.
    pub fn nonlinearity(&self, x: &[f64], u: f64) -> (f64, f64, f64) {
        penalized_terms(self.inside(x), u, self.p, self.ell, self.slope())
    }
}

/// `(g, G, g')` given the membership flag, using the one-sided derivative from
/// below at the kink `u = ell`.
pub fn penalized_terms(inside: bool, u: f64, p: f64, ell: f64, slope: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if inside || u <= ell {
        let up = u.powf(p - 1.0);
        (up * u, up * u * u / (p + 1.0), p * up)
    } else {
        let g_ell = ell.powf(p + 1.0) / (p + 1.0);
        (slope * u, g_ell + 0.5 * slope * (u * u - ell * ell), slope)
    }
}

/// `(g, G, g')` at `(x, u)`.
pub fn penalized_nonlinearity(x: &[f64], u: f64, cfg: &PenaltyConfig) -> (f64, f64, f64) {
    cfg.nonlinearity(x, u)
}
