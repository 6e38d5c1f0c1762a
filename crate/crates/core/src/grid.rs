//! Uniform grid in the logarithmic variable `t = ln r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum node count accepted by the channel discretization.
pub const MIN_SPECTRAL_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGrid {
    t_min: f64,
    t_max: f64,
    n: usize,
}

impl LogGrid {
    pub fn new(t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite()) || t_min >= t_max {
            return Err(Error::InvalidGrid(format!(
                "need finite t_min < t_max (got {t_min}, {t_max})"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes (got {n})")));
        }
        Ok(Self { t_min, t_max, n })
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        (self.t_max - self.t_min) / (self.n - 1) as f64
    }

    pub fn t(&self, j: usize) -> f64 {
        if j == self.n - 1 {
            self.t_max
        } else {
            self.t_min + j as f64 * self.h()
        }
    }

    pub fn r(&self, j: usize) -> f64 {
        self.t(j).exp()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.t(j)).collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.r(j)).collect()
    }

    /// Trapezoid weight of node `j`.
    pub fn weight(&self, j: usize) -> f64 {
        let h = self.h();
        if j == 0 || j == self.n - 1 {
            0.5 * h
        } else {
            h
        }
    }

    /// `int_{R^d} f dx` for a radial `f` sampled at the nodes,
    /// using `dx = |S^{d-1}| e^{dt} dt` and trapezoid weights.
    pub fn integrate_radial(&self, values: &[f64], d: usize) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        let area = crate::params::sphere_area(d);
        let df = d as f64;
        area * values
            .iter()
            .enumerate()
            .map(|(j, v)| self.weight(j) * (df * self.t(j)).exp() * v)
            .sum::<f64>()
    }

    /// The same grid with every other node, available when `n` is odd.
    pub fn coarsened(&self) -> Option<Self> {
        if self.n % 2 == 1 && self.n >= 3 {
            Some(Self { t_min: self.t_min, t_max: self.t_max, n: self.n.div_ceil(2) })
        } else {
            None
        }
    }

    /// Index of the node closest to `t`, clamped to the grid.
    pub fn nearest(&self, t: f64) -> usize {
        let x = ((t - self.t_min) / self.h()).round();
        x.clamp(0.0, (self.n - 1) as f64) as usize
    }
}

/// `build_grid` under its operational name.
pub fn build_grid(t_min: f64, t_max: f64, n: usize) -> Result<LogGrid> {
    LogGrid::new(t_min, t_max, n)
}
