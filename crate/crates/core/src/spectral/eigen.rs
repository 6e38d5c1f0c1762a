use serde::{Deserialize, Serialize};

use super::channel::ChannelOperator;
use super::tridiag::{count_below, TridiagLu};
use crate::error::{Error, Result};
use crate::grid::LogGrid;

/// Levels in `(-ZERO_LEVEL, 0)` are treated as the threshold itself.
pub const ZERO_LEVEL: f64 = 1e-12;

/// Fraction of nodes at each end inspected for boundary contamination.
pub const EDGE_FRACTION: f64 = 0.05;

const MAX_RESTARTS: usize = 5;
const MAX_INVERSE_STEPS: usize = 12;

/// Negative eigenpairs of one channel pencil.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpectrum {
    pub ell: usize,
    pub multiplicity: usize,
    pub nu2: f64,
    pub grid: LogGrid,
    /// Ascending, all below `-ZERO_LEVEL`.
    pub eigenvalues: Vec<f64>,
    /// `B`-orthonormal vectors on the full grid; the last (Dirichlet) entry is zero.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `B`-mass in the outer 5% of nodes at either end, per eigenvector.
    pub boundary_mass: Vec<f64>,
    /// Number of negative eigenvalues in the channel, which may exceed the
    /// number returned when a cap was applied.
    pub negative_count: usize,
}

impl ChannelSpectrum {
    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_boundary_mass(&self) -> f64 {
        self.boundary_mass.iter().copied().fold(0.0, f64::max)
    }
}

/// Fraction of `w^T B w` carried by the outer `EDGE_FRACTION` of nodes.
pub fn boundary_mass(op: &ChannelOperator, w: &[f64]) -> f64 {
    let m = op.len();
    let edge = ((EDGE_FRACTION * m as f64).ceil() as usize).max(1);
    let mass = |j: usize| op.weight[j] * w[j] * w[j];
    let total: f64 = (0..m).map(mass).sum();
    let outer: f64 = (0..edge).chain(m.saturating_sub(edge)..m).map(mass).sum();
    if total > 0.0 {
        outer / total
    } else {
        0.0
    }
}

/// Lowest (at most `k`) negative eigenpairs of the pencil.
///
/// Eigenvalues are bracketed by inertia counts on `A - sigma B`, eigenvectors
/// come from shifted inverse iteration, and the returned eigenvalue is the
/// Rayleigh quotient of the converged vector.
pub fn lowest_eigenpairs(op: &ChannelOperator, k: usize, tol: f64) -> Result<ChannelSpectrum> {
    let m = op.len();
    let (diag, off, wt) = (&op.stiffness_diag, &op.stiffness_off, &op.weight);
    let negative_count = count_below(diag, off, wt, -ZERO_LEVEL);
    let want = negative_count.min(k);

    let floor = (0..m).map(|j| op.local[j] / wt[j]).fold(f64::INFINITY, f64::min).min(0.0) - 1.0;
    let mut lower = vec![floor; want];
    let mut upper = vec![-ZERO_LEVEL; want];
    let record = |sigma: f64, c: usize, lower: &mut [f64], upper: &mut [f64]| {
        for (j, (lo, hi)) in lower.iter_mut().zip(upper.iter_mut()).enumerate() {
            if j < c {
                *hi = hi.min(sigma);
            } else {
                *lo = lo.max(sigma);
            }
        }
    };

    let mut eigenvalues = Vec::with_capacity(want);
    let mut eigenvectors: Vec<Vec<f64>> = Vec::with_capacity(want);
    let mut masses = Vec::with_capacity(want);
    for i in 0..want {
        loop {
            let (lo, hi) = (lower[i], upper[i]);
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 0.25 * tol || mid <= lo || mid >= hi {
                break;
            }
            let c = count_below(diag, off, wt, mid);
            record(mid, c, &mut lower, &mut upper);
        }
        let shift = 0.5 * (lower[i] + upper[i]);
        let (lambda, w) = inverse_iteration(op, shift, tol, &eigenvectors, (lower[i], upper[i]))
            .ok_or(Error::NonConvergence { ell: op.ell, index: i })?;
        masses.push(boundary_mass(op, &w));
        eigenvalues.push(lambda);
        eigenvectors.push(w);
    }

    let eigenvectors = eigenvectors
        .into_iter()
        .map(|mut w| {
            w.push(0.0);
            w
        })
        .collect();
    Ok(ChannelSpectrum {
        ell: op.ell,
        multiplicity: 0,
        nu2: op.nu2,
        grid: op.grid,
        eigenvalues,
        eigenvectors,
        boundary_mass: masses,
        negative_count,
    })
}

fn b_normalize(op: &ChannelOperator, x: &mut [f64]) -> bool {
    let norm = op.b_inner(x, x).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    true
}

fn orthogonalize(op: &ChannelOperator, x: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = op.b_inner(x, q);
        x.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
    }
}

fn inverse_iteration(
    op: &ChannelOperator,
    shift: f64,
    tol: f64,
    previous: &[Vec<f64>],
    bracket: (f64, f64),
) -> Option<(f64, Vec<f64>)> {
    let m = op.len();
    let sub = &op.stiffness_off;
    let slack = 10.0 * tol + 1e-9 * (1.0 + shift.abs());
    for attempt in 0..=MAX_RESTARTS {
        // perturbed shifts on restarts, alternating around the bracket midpoint
        let sign = if attempt % 2 == 0 { 1.0 } else { -1.0 };
        let sigma = shift + sign * attempt as f64 * 0.1 * tol;
        let diag: Vec<f64> = (0..m).map(|j| op.stiffness_diag[j] - sigma * op.weight[j]).collect();
        let lu = TridiagLu::factor(sub, &diag, sub);

        let mut x: Vec<f64> = (0..m)
            .map(|j| 1.0 + 0.5 * ((j as f64 + 1.0) * (0.618_033_988_75 + attempt as f64)).sin())
            .collect();
        orthogonalize(op, &mut x, previous);
        if !b_normalize(op, &mut x) {
            continue;
        }
        let mut converged = false;
        for _ in 0..MAX_INVERSE_STEPS {
            let mut y: Vec<f64> = x.iter().zip(&op.weight).map(|(a, b)| a * b).collect();
            lu.solve_in_place(&mut y);
            orthogonalize(op, &mut y, previous);
            if !b_normalize(op, &mut y) {
                break;
            }
            if op.b_inner(&y, &x) < 0.0 {
                y.iter_mut().for_each(|v| *v = -*v);
            }
            let diff: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let change = op.b_inner(&diff, &diff).sqrt();
            x = y;
            if change <= 1e-11 {
                converged = true;
                break;
            }
        }
        if !converged {
            continue;
        }
        let lambda = op.quadratic_form(&x);
        if lambda < bracket.0 - slack || lambda > bracket.1 + slack {
            continue;
        }
        // sign convention: largest component positive
        let big = x.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        if big < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        return Some((lambda, x));
    }
    None
}
