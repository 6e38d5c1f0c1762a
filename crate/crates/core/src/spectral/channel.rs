use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{LogGrid, MIN_SPECTRAL_NODES};
use crate::params::{channel_strength, ProblemParams};
use crate::potential::RadialPotential;

/// The pencil `(A, B)` of one angular channel in the log variable.
///
/// Unknowns live on nodes `0..n-1`; the last grid node carries the Dirichlet
/// value `w = 0`. At the left end the regular branch `w ~ e^{nu t}` is selected
/// by the Robin condition `w' = nu w` on a half cell (Neumann when `nu = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelOperator {
    pub ell: usize,
    pub nu2: f64,
    pub grid: LogGrid,
    /// Diagonal of the stiffness matrix `A`.
    pub stiffness_diag: Vec<f64>,
    /// Off-diagonal of `A` (all equal to `-1/h`).
    pub stiffness_off: Vec<f64>,
    /// Diagonal mass matrix `B`, `e^{2 t_j}` times the quadrature weight.
    pub weight: Vec<f64>,
    /// `wt_j (nu^2 - e^{2 t_j} V_j)`, the zeroth-order part of `A`.
    pub local: Vec<f64>,
}

impl ChannelOperator {
    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    pub fn nu(&self) -> f64 {
        self.nu2.sqrt()
    }

    /// `w^T A w` in difference form, free of the cancellation in `sum w_i A_ij w_j`.
    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        let zeroth: f64 = self.local.iter().zip(w).map(|(l, x)| l * x * x).sum();
        self.gradient_form(w) + zeroth
    }

    /// The quadratic form without the potential: gradient, barrier and the
    /// boundary term.
    pub fn kinetic_form(&self, w: &[f64]) -> f64 {
        let barrier: f64 = (0..self.len()).map(|j| self.grid.weight(j) * self.nu2 * w[j] * w[j]).sum();
        self.gradient_form(w) + barrier
    }

    fn gradient_form(&self, w: &[f64]) -> f64 {
        let h = self.grid.h();
        let m = self.len();
        let grad: f64 = w[..m].windows(2).map(|p| (p[1] - p[0]) * (p[1] - p[0])).sum();
        (grad + w[m - 1] * w[m - 1]) / h + self.nu() * w[0] * w[0]
    }

    pub fn b_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weight.iter().zip(u).zip(v).map(|((b, x), y)| b * x * y).sum()
    }

    /// `(A - sigma B) x`.
    pub fn apply_shifted(&self, sigma: f64, x: &[f64]) -> Vec<f64> {
        let m = self.len();
        (0..m)
            .map(|i| {
                let mut acc = (self.stiffness_diag[i] - sigma * self.weight[i]) * x[i];
                if i > 0 {
                    acc += self.stiffness_off[i - 1] * x[i - 1];
                }
                if i + 1 < m {
                    acc += self.stiffness_off[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }
}

/// Builds the channel-`ell` pencil for `-w'' + nu^2 w - e^{2t} V w = lambda e^{2t} w`.
pub fn discretize_channel(v: &RadialPotential, ell: usize, params: &ProblemParams) -> Result<ChannelOperator> {
    let grid = *v.grid();
    if grid.len() < MIN_SPECTRAL_NODES {
        return Err(Error::InvalidGrid(format!(
            "channel solves need at least {MIN_SPECTRAL_NODES} nodes (got {})",
            grid.len()
        )));
    }
    let nu2 = channel_strength(params, ell);
    let h = grid.h();
    let m = grid.len() - 1;
    let vals = v.values();
    let mut weight = Vec::with_capacity(m);
    let mut local = Vec::with_capacity(m);
    let mut diag = Vec::with_capacity(m);
    for j in 0..m {
        let wt = grid.weight(j);
        let e2t = (2.0 * grid.t(j)).exp();
        let loc = wt * (nu2 - e2t * vals[j]);
        weight.push(wt * e2t);
        local.push(loc);
        let lap = if j == 0 { 1.0 / h } else { 2.0 / h };
        diag.push(lap + loc);
    }
    diag[0] += nu2.sqrt();
    Ok(ChannelOperator {
        ell,
        nu2,
        grid,
        stiffness_diag: diag,
        stiffness_off: vec![-1.0 / h; m - 1],
        weight,
        local,
    })
}
