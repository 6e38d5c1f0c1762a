//! Min-max levels: channel eigenvalues expanded by multiplicity, merged and
//! padded with zeros.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::params::ProblemParams;
use crate::spectral::ChannelSpectrum;

/// Origin of a level: channel, index inside the channel and which of the
/// `multiplicity(d, ell)` degenerate states it is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelTag {
    pub ell: usize,
    pub index: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxLevels {
    /// `lambda_1 <= ... <= lambda_N <= 0`.
    pub levels: Vec<f64>,
    /// `None` for zero padding.
    pub tags: Vec<Option<LevelTag>>,
    /// Negative levels counted with multiplicity, before truncation.
    pub negative_count: usize,
    /// `min(negative_count, N)`.
    pub occupied: usize,
    /// `lambda_{N+1}` when it is negative and was computed.
    pub next: Option<f64>,
}

impl MinMaxLevels {
    pub fn rank(&self) -> usize {
        self.levels.len()
    }
}

fn merged(spectra: &[ChannelSpectrum], d: usize) -> Vec<(f64, LevelTag)> {
    let mut all = Vec::new();
    for spec in spectra {
        let mu = if spec.multiplicity > 0 { spec.multiplicity } else { crate::params::multiplicity(d, spec.ell) };
        for (index, &lambda) in spec.eigenvalues.iter().enumerate() {
            for slot in 0..mu {
                all.push((lambda, LevelTag { ell: spec.ell, index, slot }));
            }
        }
    }
    all.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.ell.cmp(&b.1.ell))
            .then(a.1.index.cmp(&b.1.index))
            .then(a.1.slot.cmp(&b.1.slot))
    });
    all
}

pub fn assemble_min_max_levels(spectra: &[ChannelSpectrum], params: &ProblemParams) -> MinMaxLevels {
    let n = params.rank;
    let all = merged(spectra, params.d);
    let negative_count: usize = spectra
        .iter()
        .map(|s| {
            let mu = if s.multiplicity > 0 { s.multiplicity } else { crate::params::multiplicity(params.d, s.ell) };
            mu * s.negative_count.max(s.eigenvalues.len())
        })
        .sum();
    let mut levels = vec![0.0; n];
    let mut tags = vec![None; n];
    for (i, (lambda, tag)) in all.iter().take(n).enumerate() {
        levels[i] = *lambda;
        tags[i] = Some(*tag);
    }
    MinMaxLevels {
        levels,
        tags,
        negative_count,
        occupied: negative_count.min(n),
        next: all.get(n).map(|x| x.0),
    }
}

/// `sum_i |lambda_i|^s`.
pub fn objective(levels: &MinMaxLevels, s: f64) -> f64 {
    levels.levels.iter().map(|l| l.abs().powf(s)).sum()
}
