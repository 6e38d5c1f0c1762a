//! Channel-by-channel negative spectrum of `-Delta - c/|x|^2 - V` for radial `V`.

mod channel;
mod eigen;
pub mod tridiag;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use channel::{discretize_channel, ChannelOperator};
pub use eigen::{boundary_mass, lowest_eigenpairs, ChannelSpectrum, EDGE_FRACTION, ZERO_LEVEL};

use crate::error::{Error, Result};
use crate::params::{multiplicity, ProblemParams};
use crate::potential::RadialPotential;

/// Edge-mass fraction above which an eigenvector is considered contaminated
/// by the artificial ends of the grid.
pub const CONTAMINATION_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSettings {
    /// Absolute eigenvalue tolerance.
    pub tol: f64,
    pub max_channels: usize,
    /// Eigenpairs computed per channel.
    pub max_per_channel: usize,
    /// Channels solved concurrently per batch.
    pub batch: usize,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_channels: 64, max_per_channel: 64, batch: 2 }
    }
}

/// Solves channels `ell = 0, 1, ...` until the first one without a bound state.
///
/// Stopping there is sound: the barrier `nu^2` and the left boundary term both
/// grow with `ell`, so `A_{ell+1} >= A_ell` and later channels cannot bind.
pub fn negative_spectrum(
    v: &RadialPotential,
    params: &ProblemParams,
    settings: &SpectralSettings,
) -> Result<Vec<ChannelSpectrum>> {
    let mut out = Vec::new();
    if v.is_zero() {
        return Ok(out);
    }
    let batch = settings.batch.max(1);
    let mut start = 0;
    while start < settings.max_channels {
        let end = (start + batch).min(settings.max_channels);
        let solved: Vec<Result<ChannelSpectrum>> = (start..end)
            .into_par_iter()
            .map(|ell| {
                let op = discretize_channel(v, ell, params)?;
                let mut spec = lowest_eigenpairs(&op, settings.max_per_channel, settings.tol)?;
                spec.multiplicity = multiplicity(params.d, ell);
                Ok(spec)
            })
            .collect();
        for spec in solved {
            let spec = spec?;
            if spec.negative_count == 0 {
                return Ok(out);
            }
            out.push(spec);
        }
        start = end;
    }
    Err(Error::ChannelCapExhausted { max_channels: settings.max_channels })
}

/// First eigenvector whose edge mass exceeds [`CONTAMINATION_LIMIT`].
pub fn check_contamination(spectra: &[ChannelSpectrum]) -> Result<()> {
    for spec in spectra {
        for (index, &fraction) in spec.boundary_mass.iter().enumerate() {
            if fraction > CONTAMINATION_LIMIT {
                return Err(Error::BoundaryContamination { ell: spec.ell, index, fraction });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::params::hardy_constant;
    use approx::assert_relative_eq;

    fn dense_eigenvalues(op: &ChannelOperator) -> Vec<f64> {
        let m = op.len();
        let s: Vec<f64> = op.weight.iter().map(|b| 1.0 / b.sqrt()).collect();
        let mat = nalgebra::DMatrix::from_fn(m, m, |i, j| {
            let a = if i == j {
                op.stiffness_diag[i]
            } else if i + 1 == j {
                op.stiffness_off[i]
            } else if j + 1 == i {
                op.stiffness_off[j]
            } else {
                0.0
            };
            s[i] * a * s[j]
        });
        let mut ev: Vec<f64> = mat.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    #[test]
    fn free_operator_has_no_bound_states() {
        for d in 3..=5 {
            let p = ProblemParams::critical(d, 1.0, 1).unwrap();
            let g = build_grid(-10.0, 5.0, 1001).unwrap();
            let v = RadialPotential::zeros(g);
            for ell in 0..=8 {
                let op = discretize_channel(&v, ell, &p).unwrap();
                let spec = lowest_eigenpairs(&op, 4, 1e-10).unwrap();
                assert!(spec.is_empty());
                assert_eq!(tridiag::count_below(&op.stiffness_diag, &op.stiffness_off, &op.weight, -1e-12), 0);
            }
            assert!(negative_spectrum(&v, &p, &SpectralSettings::default()).unwrap().is_empty());
        }
    }

    #[test]
    fn potential_enters_diagonal_only() {
        let p = ProblemParams::critical(3, 1.0, 1).unwrap();
        let g = build_grid(-4.0, 3.0, 141).unwrap();
        let zero = discretize_channel(&RadialPotential::zeros(g), 0, &p).unwrap();
        let v = RadialPotential::gaussian_bump(g, 0.0, 1.0).unwrap().scaled(7.0).unwrap();
        let op = discretize_channel(&v, 0, &p).unwrap();
        assert_eq!(zero.stiffness_off, op.stiffness_off);
        assert_eq!(zero.weight, op.weight);
        for j in 0..op.len() {
            let drop = zero.stiffness_diag[j] - op.stiffness_diag[j];
            assert_relative_eq!(drop, op.weight[j] * v.values()[j], epsilon = 1e-12 * zero.stiffness_diag[j]);
        }
        let one = discretize_channel(&RadialPotential::zeros(g), 1, &p).unwrap();
        for j in 1..op.len() {
            assert_relative_eq!(one.stiffness_diag[j] - zero.stiffness_diag[j], 2.0 * g.weight(j), max_relative = 1e-12);
        }
    }

    #[test]
    fn matches_dense_solver_on_small_grid() {
        let p = ProblemParams::critical(3, 1.0, 1).unwrap();
        let g = build_grid(-2.0, 3.0, 200).unwrap();
        let v = RadialPotential::gaussian_bump(g, 0.0, 0.7).unwrap().scaled(40.0).unwrap();
        for ell in 0..3 {
            let op = discretize_channel(&v, ell, &p).unwrap();
            let dense: Vec<f64> = dense_eigenvalues(&op).into_iter().filter(|&e| e < -ZERO_LEVEL).collect();
            let spec = lowest_eigenpairs(&op, 64, 1e-10).unwrap();
            assert_eq!(spec.eigenvalues.len(), dense.len());
            for (a, b) in spec.eigenvalues.iter().zip(&dense) {
                assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn eigenvectors_are_b_orthonormal() {
        let p = ProblemParams::critical(3, 1.0, 1).unwrap();
        let g = build_grid(-10.0, 4.0, 1401).unwrap();
        let v = RadialPotential::square_well(g, 100.0, 1.0).unwrap();
        let op = discretize_channel(&v, 0, &p).unwrap();
        let spec = lowest_eigenpairs(&op, 10, 1e-10).unwrap();
        assert!(spec.eigenvalues.len() >= 2);
        assert!(spec.eigenvalues.windows(2).all(|w| w[0] < w[1]));
        for (i, u) in spec.eigenvectors.iter().enumerate() {
            assert_eq!(*u.last().unwrap(), 0.0);
            for (j, w) in spec.eigenvectors.iter().enumerate() {
                let g = op.b_inner(&u[..op.len()], &w[..op.len()]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() <= 1e-10, "gram[{i}][{j}] = {g}");
            }
        }
    }

    #[test]
    fn channel_levels_increase_with_ell() {
        let p = ProblemParams::critical(3, 1.0, 1).unwrap();
        let g = build_grid(-8.0, 4.0, 801).unwrap();
        let v = RadialPotential::square_well(g, 200.0, 1.0).unwrap();
        let spectra = negative_spectrum(&v, &p, &SpectralSettings::default()).unwrap();
        assert!(spectra.len() >= 2);
        for w in spectra.windows(2) {
            assert!(w[0].eigenvalues[0] <= w[1].eigenvalues[0]);
            assert_eq!(w[1].ell, w[0].ell + 1);
        }
        let sequential = SpectralSettings { batch: 1, ..SpectralSettings::default() };
        assert_eq!(negative_spectrum(&v, &p, &sequential).unwrap(), spectra);
    }

    #[test]
    fn subcritical_coupling_raises_levels() {
        let g = build_grid(-8.0, 4.0, 801).unwrap();
        let v = RadialPotential::square_well(g, 10.0, 1.0).unwrap();
        let crit = ProblemParams::critical(3, 1.0, 1).unwrap();
        let half = crit.with_coupling(0.5 * hardy_constant(3).unwrap()).unwrap();
        let a = lowest_eigenpairs(&discretize_channel(&v, 0, &crit).unwrap(), 1, 1e-10).unwrap();
        let b = lowest_eigenpairs(&discretize_channel(&v, 0, &half).unwrap(), 1, 1e-10).unwrap();
        assert!(a.eigenvalues[0] < b.eigenvalues[0]);
    }

    #[test]
    fn cap_exhaustion_is_reported() {
        let p = ProblemParams::critical(3, 1.0, 1).unwrap();
        let g = build_grid(-6.0, 3.0, 401).unwrap();
        let v = RadialPotential::square_well(g, 400.0, 1.0).unwrap();
        let tight = SpectralSettings { max_channels: 2, ..SpectralSettings::default() };
        assert_eq!(
            negative_spectrum(&v, &p, &tight),
            Err(Error::ChannelCapExhausted { max_channels: 2 })
        );
    }

    #[test]
    fn tiny_grids_are_rejected() {
        let p = ProblemParams::critical(3, 1.0, 1).unwrap();
        let g = build_grid(0.0, 1.0, 10).unwrap();
        assert!(discretize_channel(&RadialPotential::zeros(g), 0, &p).is_err());
    }
}
