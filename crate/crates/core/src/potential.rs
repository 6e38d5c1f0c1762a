//! Nonnegative radial potentials on a [`LogGrid`] and the algebra of the
//! normalization constraint: `L^{s+d/2}` norm, amplitude normalization and the
//! dilation `V -> t^2 V(t .)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LogGrid;
use crate::params::ProblemParams;

/// Fraction of the norm that a grid translation may drop off the ends.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Values below this multiple of the maximum count as outside the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialPotential {
    grid: LogGrid,
    values: Vec<f64>,
}

impl RadialPotential {
    pub fn new(grid: LogGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidPotential(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidPotential(format!("value {v} at node {j} is not finite and >= 0")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: LogGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    /// Samples `f(r)` at the nodes. Negative samples are clipped to zero.
    pub fn from_fn(grid: LogGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|j| f(grid.r(j)).max(0.0)).collect();
        Self::new(grid, values)
    }

    /// `depth` on `r <= radius`, zero outside.
    ///
    /// Nodal values are dual-cell averages of `e^{2t} V`, so the jump enters
    /// the discrete operator through its exact integral rather than a point
    /// sample.
    pub fn square_well(grid: LogGrid, depth: f64, radius: f64) -> Result<Self> {
        if !(depth >= 0.0 && radius > 0.0) {
            return Err(Error::InvalidPotential("square well needs depth >= 0, radius > 0".into()));
        }
        let h = grid.h();
        let edge = radius.ln();
        let values = (0..grid.len())
            .map(|j| {
                let tj = grid.t(j);
                let a = (tj - 0.5 * h).max(grid.t_min());
                let b = (tj + 0.5 * h).min(grid.t_max());
                let top = b.min(edge);
                if top <= a {
                    return 0.0;
                }
                let integral = depth * ((2.0 * top).exp() - (2.0 * a).exp()) / 2.0;
                integral / ((b - a) * (2.0 * tj).exp())
            })
            .collect();
        Self::new(grid, values)
    }

    /// Gaussian bump `exp(-(t - center)^2 / (2 width^2))` in the log variable.
    pub fn gaussian_bump(grid: LogGrid, center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidPotential("bump width must be positive".into()));
        }
        let values = (0..grid.len())
            .map(|j| {
                let z = (grid.t(j) - center) / width;
                (-0.5 * z * z).exp()
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &LogGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|v| v * factor).collect())
    }

    /// Pointwise `(1 - alpha) self + alpha other`.
    pub fn mix(&self, other: &Self, alpha: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::InvalidPotential("mixing potentials on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
            .collect();
        Self::new(self.grid, values)
    }

    pub fn lt_norm(&self, params: &ProblemParams) -> f64 {
        potential_lt_norm(self, params)
    }
}

/// `int V^{s+d/2} dx` over `R^d`.
pub fn potential_lt_norm(v: &RadialPotential, params: &ProblemParams) -> f64 {
    let q = params.lt_exponent();
    let powered: Vec<f64> = v.values.iter().map(|x| x.powf(q)).collect();
    v.grid.integrate_radial(&powered, params.d)
}

/// `L^{s+d/2}` distance `(int |V - W|^{s+d/2} dx)^{1/(s+d/2)}`.
pub fn lt_distance(v: &RadialPotential, w: &RadialPotential, params: &ProblemParams) -> f64 {
    let q = params.lt_exponent();
    let powered: Vec<f64> = v.values.iter().zip(&w.values).map(|(a, b)| (a - b).abs().powf(q)).collect();
    v.grid.integrate_radial(&powered, params.d).powf(1.0 / q)
}

/// Rescales the amplitude so that `int V^{s+d/2} dx = 1`.
pub fn normalize_potential(v: &RadialPotential, params: &ProblemParams) -> Result<RadialPotential> {
    let norm = potential_lt_norm(v, params);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegeneratePotential);
    }
    v.scaled(norm.powf(-1.0 / params.lt_exponent()))
}

/// The dilation `V -> t^2 V(t .)` with `t = e^{k h}`: a translation by `k` nodes
/// in the log variable together with the factor `e^{2 k h}`.
///
/// The `L^{s+d/2}` norm picks up the exact factor `t^{2s}`; the eigenvalues of
/// the channel pencils pick up `t^2`.
pub fn scale_potential(v: &RadialPotential, k: i64, params: &ProblemParams) -> Result<RadialPotential> {
    if k == 0 {
        return Ok(v.clone());
    }
    let n = v.grid.len() as i64;
    let q = params.lt_exponent();
    let total = potential_lt_norm(v, params);
    let cutoff = SUPPORT_THRESHOLD * v.max();

    // mass carried by source nodes that fall off the grid
    let grid = v.grid;
    let mut dropped = vec![0.0; grid.len()];
    for (j, x) in v.values.iter().enumerate() {
        let dest = j as i64 - k;
        if (dest < 0 || dest >= n) && *x >= cutoff {
            dropped[j] = x.powf(q);
        }
    }
    let dropped_norm = grid.integrate_radial(&dropped, params.d);
    if total > 0.0 && dropped_norm > BOUNDARY_TOL * total {
        return Err(Error::SupportEscapesGrid { shift: k, dropped: dropped_norm / total });
    }

    let factor = (2.0 * k as f64 * grid.h()).exp();
    let values = (0..n)
        .map(|j| {
            let src = j + k;
            if (0..n).contains(&src) {
                factor * v.values[src as usize]
            } else {
                0.0
            }
        })
        .collect();
    RadialPotential::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use approx::assert_relative_eq;

    fn params() -> ProblemParams {
        ProblemParams::critical(3, 1.0, 1).unwrap()
    }

    #[test]
    fn zero_potential() {
        let g = build_grid(-5.0, 3.0, 101).unwrap();
        let v = RadialPotential::zeros(g);
        assert_eq!(potential_lt_norm(&v, &params()), 0.0);
        assert_eq!(normalize_potential(&v, &params()), Err(Error::DegeneratePotential));
    }

    #[test]
    fn rejects_negative_values() {
        let g = build_grid(-1.0, 1.0, 16).unwrap();
        let mut vals = vec![1.0; 16];
        vals[3] = -1e-3;
        assert!(RadialPotential::new(g, vals).is_err());
        assert!(RadialPotential::new(g, vec![1.0; 15]).is_err());
    }

    #[test]
    fn normalization_scale_factor() {
        let g = build_grid(-6.0, 4.0, 501).unwrap();
        let p = params();
        let v = RadialPotential::gaussian_bump(g, 0.0, 1.0).unwrap();
        let norm = potential_lt_norm(&v, &p);
        // rescale so the norm is exactly 16
        let v16 = v.scaled((16.0 / norm).powf(1.0 / 2.5)).unwrap();
        assert_relative_eq!(potential_lt_norm(&v16, &p), 16.0, max_relative = 1e-13);
        let n = normalize_potential(&v16, &p).unwrap();
        assert_relative_eq!(n.values()[250] / v16.values()[250], 16f64.powf(-0.4), max_relative = 1e-13);
        assert_relative_eq!(potential_lt_norm(&n, &p), 1.0, max_relative = 1e-12);
        // idempotent
        let nn = normalize_potential(&n, &p).unwrap();
        for (a, b) in n.values().iter().zip(nn.values()) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }

    #[test]
    fn norm_matches_refined_richardson_quadrature() {
        // oracle: trapezoid on 4x refined grids, Richardson-extrapolated, for a smooth bump
        let p = params();
        let f = |r: f64| 3.0 * (-(r.ln() - 0.3).powi(2)).exp();
        let g = build_grid(-12.0, 8.0, 2001).unwrap();
        let v = RadialPotential::from_fn(g, f).unwrap();
        let got = potential_lt_norm(&v, &p);
        let trap = |n: usize| {
            let gg = build_grid(-12.0, 8.0, n).unwrap();
            let vals: Vec<f64> = gg.radii().iter().map(|&r| f(r).powf(2.5)).collect();
            gg.integrate_radial(&vals, 3)
        };
        let (a, b) = (trap(4 * 2000 + 1), trap(8 * 2000 + 1));
        let oracle = (4.0 * b - a) / 3.0;
        assert_relative_eq!(got, oracle, max_relative = 1e-10);
    }

    #[test]
    fn square_well_cell_averages() {
        let g = build_grid(-4.0, 2.0, 601).unwrap();
        let v = RadialPotential::square_well(g, 10.0, 1.0).unwrap();
        let h = g.h();
        assert_relative_eq!(v.values()[0], 10.0 * (h.exp() - 1.0) / h, max_relative = 1e-12);
        assert_relative_eq!(v.values()[1], 10.0 * h.sinh() / h, max_relative = 1e-12);
        assert_eq!(*v.values().last().unwrap(), 0.0);
        // node at t = 0 sits on the jump: cell half inside
        let j0 = g.nearest(0.0);
        assert!(v.values()[j0] > 4.0 && v.values()[j0] < 6.0);
        // integral of e^{2t} V over the grid is exact
        let total: f64 = (0..g.len()).map(|j| g.weight(j) * (2.0 * g.t(j)).exp() * v.values()[j]).sum();
        let exact = 10.0 * (1.0 - (-8.0f64).exp()) / 2.0;
        assert_relative_eq!(total, exact, max_relative = 1e-12);
    }

    #[test]
    fn dilation_translates_and_scales() {
        let g = build_grid(-8.0, 6.0, 1401).unwrap();
        let p = params();
        let v = normalize_potential(&RadialPotential::gaussian_bump(g, 0.0, 0.5).unwrap(), &p).unwrap();
        assert_eq!(scale_potential(&v, 0, &p).unwrap(), v);
        let w = scale_potential(&v, 3, &p).unwrap();
        let factor = (2.0 * 3.0 * g.h()).exp();
        assert_relative_eq!(w.values()[700], factor * v.values()[703], max_relative = 1e-15);
        // norm picks up t^{2s} exactly
        let t2s = (2.0 * p.s * 3.0 * g.h()).exp();
        assert_relative_eq!(potential_lt_norm(&w, &p), t2s, max_relative = 1e-12);
    }

    #[test]
    fn dilation_refuses_to_drop_support() {
        let g = build_grid(-8.0, 6.0, 1401).unwrap();
        let p = params();
        let v = RadialPotential::gaussian_bump(g, 5.5, 0.3).unwrap();
        assert!(matches!(scale_potential(&v, -200, &p), Err(Error::SupportEscapesGrid { .. })));
        assert!(scale_potential(&v, 200, &p).is_ok());
    }
}
