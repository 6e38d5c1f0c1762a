//! Problem parameters and the closed-form exponents derived from them.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Sharp constant of the Hardy inequality in dimension `d`, `(d-2)^2 / 4`.
pub fn hardy_constant(d: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::InvalidParams(format!("d must be ≥ 3 (got {d})")));
    }
    let k = d as f64 - 2.0;
    Ok(k * k / 4.0)
}

/// Surface area of the unit sphere in `R^d`, `2 pi^{d/2} / Gamma(d/2)`.
///
/// Evaluated with the integer/half-integer closed forms of the gamma function.
pub fn sphere_area(d: usize) -> f64 {
    assert!(d >= 1, "sphere_area needs d >= 1");
    // Gamma(d/2)
    let gamma_half = if d.is_multiple_of(2) {
        (1..d / 2).map(|k| k as f64).product::<f64>()
    } else {
        // Gamma(k + 1/2) = sqrt(pi) * (2k-1)!! / 2^k with k = (d-1)/2
        let k = (d - 1) / 2;
        let double_fact: f64 = (1..=k).map(|j| (2 * j - 1) as f64).product();
        PI.sqrt() * double_fact / 2f64.powi(k as i32)
    };
    2.0 * PI.powf(d as f64 / 2.0) / gamma_half
}

/// Dimension, Hardy coupling, Lieb-Thirring exponent and rank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub d: usize,
    pub c: f64,
    pub s: f64,
    /// Number of min-max levels kept in the eigenvalue sum.
    pub rank: usize,
}

impl ProblemParams {
    pub fn new(d: usize, c: f64, s: f64, rank: usize) -> Result<Self> {
        let c_star = hardy_constant(d)?;
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParams(format!("s must be > 0 (got {s})")));
        }
        if rank == 0 {
            return Err(Error::InvalidParams("N must be >= 1".into()));
        }
        if !c.is_finite() || c < 0.0 || c > c_star * (1.0 + 4.0 * f64::EPSILON) {
            return Err(Error::InvalidParams(format!(
                "c must lie in [0, {c_star}] for d = {d} (got {c})"
            )));
        }
        Ok(Self { d, c: c.min(c_star), s, rank })
    }

    /// Parameters at the critical coupling `c = (d-2)^2/4`.
    pub fn critical(d: usize, s: f64, rank: usize) -> Result<Self> {
        Self::new(d, hardy_constant(d)?, s, rank)
    }

    pub fn with_rank(self, rank: usize) -> Result<Self> {
        Self::new(self.d, self.c, self.s, rank)
    }

    pub fn with_coupling(self, c: f64) -> Result<Self> {
        Self::new(self.d, c, self.s, self.rank)
    }

    pub fn c_star(&self) -> f64 {
        let k = self.d as f64 - 2.0;
        k * k / 4.0
    }

    pub fn exponents(&self) -> ExponentSet {
        derive_exponents(self)
    }

    /// `s + d/2`, the power of the potential in the normalization constraint.
    pub fn lt_exponent(&self) -> f64 {
        self.s + self.d as f64 / 2.0
    }

    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.d)
    }
}

/// Exponents that appear throughout the variational problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    /// Nonlinearity exponent of the ground-state equation, `(2d+4s)/(d-2+2s)`.
    pub m: f64,
    /// Dual density exponent, `(2s+d)/(2s+d-2)`.
    pub p: f64,
    /// Power mapping the density to the optimal potential, `2/(2s+d-2)`.
    pub el_power: f64,
    /// `s + d/2`.
    pub lt_norm_exponent: f64,
    /// Exponent of the far-field decay envelope, `4/(2s+d-2)`.
    pub decay_coeff: f64,
}

pub fn derive_exponents(params: &ProblemParams) -> ExponentSet {
    let d = params.d as f64;
    let s = params.s;
    let denom = 2.0 * s + d - 2.0;
    ExponentSet {
        m: (2.0 * d + 4.0 * s) / denom,
        p: (2.0 * s + d) / denom,
        el_power: 2.0 / denom,
        lt_norm_exponent: s + d / 2.0,
        decay_coeff: 4.0 / denom,
    }
}

/// Coefficient of the `1/r^2` barrier in channel `ell` after the ground-state
/// substitution: `(ell + (d-2)/2)^2 - c`.
pub fn channel_strength(params: &ProblemParams, ell: usize) -> f64 {
    let a = ell as f64 + (params.d as f64 - 2.0) / 2.0;
    a * a - params.c
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of linearly independent spherical harmonics of degree `ell` in `R^d`.
pub fn multiplicity(d: usize, ell: usize) -> usize {
    assert!(d >= 2, "multiplicity needs d >= 2");
    let total = binomial(ell + d - 1, d - 1);
    let lower = if ell >= 2 { binomial(ell + d - 3, d - 1) } else { 0 };
    (total - lower) as usize
}
