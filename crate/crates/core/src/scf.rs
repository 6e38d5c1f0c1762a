//! Self-consistent iteration on the Euler-Lagrange system
//! `V = normalize(rho^{2/(2s+d-2)})`, `rho = sum_i |lambda_i|^{s-1} |u_i|^2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::grid::LogGrid;
use crate::levels::{assemble_min_max_levels, objective, MinMaxLevels};
use crate::params::ProblemParams;
use crate::potential::{lt_distance, normalize_potential, potential_lt_norm, RadialPotential};
use crate::spectral::{negative_spectrum, ChannelSpectrum, SpectralSettings, CONTAMINATION_LIMIT, ZERO_LEVEL};

/// Accepted steps may lower the objective by at most this much.
pub const ASCENT_SLACK: f64 = 1e-14;

/// Step sizes below this end the run as stalled.
pub const MIN_ALPHA: f64 = 1e-12;

/// Occupation of one shell: `filled` of its `multiplicity` states, spread
/// uniformly over the shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellOccupation {
    pub ell: usize,
    pub index: usize,
    pub lambda: f64,
    pub multiplicity: usize,
    pub filled: f64,
}

impl ShellOccupation {
    /// Occupation of each of the shell's states.
    pub fn per_state(&self) -> f64 {
        self.filled / self.multiplicity as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupation {
    pub shells: Vec<ShellOccupation>,
    /// `N' = min(negatives, N)`.
    pub total: usize,
    pub partial: bool,
}

/// Fills shells in ascending `(lambda, ell, index)` order until `N` states
/// are used. An overfull shell is filled fractionally and flagged.
pub fn assign_occupations(spectra: &[ChannelSpectrum], params: &ProblemParams) -> Occupation {
    let mut shells: Vec<ShellOccupation> = spectra
        .iter()
        .flat_map(|spec| {
            let mu = if spec.multiplicity > 0 { spec.multiplicity } else { crate::params::multiplicity(params.d, spec.ell) };
            spec.eigenvalues.iter().enumerate().map(move |(index, &lambda)| ShellOccupation {
                ell: spec.ell,
                index,
                lambda,
                multiplicity: mu,
                filled: 0.0,
            })
        })
        .collect();
    shells.sort_by(|a, b| {
        a.lambda
            .partial_cmp(&b.lambda)
            .unwrap_or(Ordering::Equal)
            .then(a.ell.cmp(&b.ell))
            .then(a.index.cmp(&b.index))
    });
    let mut remaining = params.rank;
    let mut partial = false;
    let mut kept = Vec::new();
    for mut shell in shells {
        if remaining == 0 {
            break;
        }
        let take = remaining.min(shell.multiplicity);
        partial |= take < shell.multiplicity;
        shell.filled = take as f64;
        remaining -= take;
        kept.push(shell);
    }
    Occupation { shells: kept, total: params.rank - remaining, partial }
}

/// Density `rho` on the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub grid: LogGrid,
    pub values: Vec<f64>,
}

impl Density {
    /// `int rho dx`.
    pub fn integral(&self, d: usize) -> f64 {
        self.grid.integrate_radial(&self.values, d)
    }
}

/// `rho(r) = sum_shells filled |lambda|^{s-1} R(r)^2 / |S^{d-1}|` with
/// `R(r) = r^{-(d-2)/2} w(ln r)`.
pub fn density_from(spectra: &[ChannelSpectrum], occupation: &Occupation, params: &ProblemParams) -> Result<Density> {
    let Some(grid) = spectra.first().map(|s| s.grid) else {
        return Err(Error::NoBoundStates);
    };
    let mut values = vec![0.0; grid.len()];
    let area = params.sphere_area();
    for shell in &occupation.shells {
        if shell.lambda.abs() < ZERO_LEVEL && params.s < 1.0 {
            return Err(Error::SingularOccupationWeight { lambda: shell.lambda });
        }
        let spec = spectra.iter().find(|s| s.ell == shell.ell).expect("occupied channel is present");
        let w = &spec.eigenvectors[shell.index];
        let coeff = shell.filled * shell.lambda.abs().powf(params.s - 1.0) / area;
        for (rho, x) in values.iter_mut().zip(w) {
            *rho += coeff * x * x;
        }
    }
    let radial_factor = params.d as f64 - 2.0;
    for (j, v) in values.iter_mut().enumerate() {
        *v *= (-radial_factor * grid.t(j)).exp();
    }
    Ok(Density { grid, values })
}

fn spectral_settings(params: &ProblemParams, base: &SpectralSettings) -> SpectralSettings {
    SpectralSettings { max_per_channel: base.max_per_channel.min(params.rank + 1), ..*base }
}

fn el_map_from(v: &RadialPotential, spectra: &[ChannelSpectrum], params: &ProblemParams) -> Result<RadialPotential> {
    if spectra.is_empty() {
        return Err(Error::NoBoundStates);
    }
    let rho = density_from(spectra, &assign_occupations(spectra, params), params)?;
    let power = params.exponents().el_power;
    let values = rho.values.iter().map(|r| r.powf(power)).collect();
    normalize_potential(&RadialPotential::new(*v.grid(), values)?, params)
}

/// One Euler-Lagrange step: normalized `rho^{2/(2s+d-2)}` built from the
/// occupied eigenfunctions of `V`.
pub fn el_map(v: &RadialPotential, params: &ProblemParams, settings: &SpectralSettings) -> Result<RadialPotential> {
    let v = normalize_potential(v, params)?;
    let spectra = negative_spectrum(&v, params, &spectral_settings(params, settings))?;
    el_map_from(&v, &spectra, params)
}

/// `L^{s+d/2}` distance between normalized `V` and its image under [`el_map`].
pub fn el_residual(v: &RadialPotential, params: &ProblemParams, settings: &SpectralSettings) -> Result<f64> {
    let v = normalize_potential(v, params)?;
    let spectra = negative_spectrum(&v, params, &spectral_settings(params, settings))?;
    Ok(lt_distance(&v, &el_map_from(&v, &spectra, params)?, params))
}

struct Evaluation {
    potential: RadialPotential,
    spectra: Vec<ChannelSpectrum>,
    levels: MinMaxLevels,
    objective: f64,
}

fn evaluate(v: &RadialPotential, params: &ProblemParams, settings: &SpectralSettings) -> Result<Evaluation> {
    let potential = normalize_potential(v, params)?;
    let spectra = negative_spectrum(&potential, params, &spectral_settings(params, settings))?;
    let levels = assemble_min_max_levels(&spectra, params);
    let objective = objective(&levels, params.s);
    Ok(Evaluation { potential, spectra, levels, objective })
}

/// Objective of the normalized candidate together with its levels. Every
/// value returned is a lower bound for the constant over radial potentials.
pub fn evaluate_candidate(
    v: &RadialPotential,
    params: &ProblemParams,
    settings: &SpectralSettings,
) -> Result<(f64, MinMaxLevels)> {
    let e = evaluate(v, params, settings)?;
    Ok((e.objective, e.levels))
}

/// `sum |lambda_i|^s / int V^{s+d/2}` without normalizing first. This ratio
/// is unchanged by the dilation `V -> t^2 V(t .)` and by nothing else that
/// moves the norm.
pub fn scale_free_objective(v: &RadialPotential, params: &ProblemParams, settings: &SpectralSettings) -> Result<f64> {
    let norm = potential_lt_norm(v, params);
    if !(norm > 0.0) {
        return Err(Error::DegeneratePotential);
    }
    let spectra = negative_spectrum(v, params, &spectral_settings(params, settings))?;
    Ok(objective(&assemble_min_max_levels(&spectra, params), params.s) / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SCFConfig {
    pub alpha0: f64,
    pub max_iters: usize,
    /// Relative objective change.
    pub tol_obj: f64,
    pub tol_residual: f64,
    pub ascent_safeguard: bool,
    pub grid: LogGrid,
    pub spectral: SpectralSettings,
    /// Number of initial bumps tried when no start is given (1 to 9).
    pub starts: usize,
    /// Seed and amplitude of the random jitter applied to the bump centers.
    pub seed: u64,
    pub jitter: f64,
}

impl SCFConfig {
    pub fn new(grid: LogGrid) -> Self {
        Self {
            alpha0: 0.5,
            max_iters: 500,
            tol_obj: 1e-10,
            tol_residual: 1e-6,
            ascent_safeguard: true,
            grid,
            spectral: SpectralSettings::default(),
            starts: 1,
            seed: 0,
            jitter: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha0 > 0.0
            && self.alpha0 <= 1.0
            && self.tol_obj > 0.0
            && self.tol_residual > 0.0
            && self.spectral.tol > 0.0
            && (1..=9).contains(&self.starts)
            && self.jitter >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid SCF configuration: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// The safeguard shrank the step below [`MIN_ALPHA`].
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    pub residual: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCFReport {
    pub params: ProblemParams,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub potential: RadialPotential,
    pub levels: MinMaxLevels,
    pub objective: f64,
    pub el_residual: f64,
    /// `lambda_{N+1} - lambda_N` when `lambda_{N+1} < 0` exists.
    pub gap: Option<f64>,
    pub trace: Vec<TraceEntry>,
    /// Largest edge-mass fraction among the computed eigenvectors.
    pub boundary_mass: f64,
    pub grid: LogGrid,
    pub occupation: Occupation,
    pub flags: Vec<String>,
    /// Index of the initial bump that produced this report.
    pub start: Option<usize>,
    #[serde(skip)]
    pub spectra: Vec<ChannelSpectrum>,
}

impl SCFReport {
    pub fn partial_shell(&self) -> bool {
        self.occupation.partial
    }
}

/// Widths and centers of the initial bumps; the first entry is the default start.
pub fn start_bumps() -> Vec<(f64, f64)> {
    let mut out = vec![(1.0, 0.0)];
    for &w in &[0.5, 1.0, 2.0] {
        for &c in &[-1.0, 0.0, 1.0] {
            if (w, c) != (1.0, 0.0) {
                out.push((w, c));
            }
        }
    }
    out
}

fn initial_potentials(config: &SCFConfig) -> Result<Vec<RadialPotential>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    start_bumps()
        .into_iter()
        .take(config.starts)
        .map(|(width, center)| {
            let shift = if config.jitter > 0.0 { config.jitter * rng.gen_range(-1.0..1.0) } else { 0.0 };
            RadialPotential::gaussian_bump(config.grid, center + shift, width)
        })
        .collect()
}

/// Runs the iteration from `v0`, or from the configured initial bumps when
/// `v0` is `None`, keeping the best converged result.
pub fn scf_optimize(params: &ProblemParams, config: &SCFConfig, v0: Option<&RadialPotential>) -> Result<SCFReport> {
    config.validate()?;
    if let Some(v) = v0 {
        if *v.grid() != config.grid {
            return Err(Error::InvalidPotential("initial potential lives on a different grid".into()));
        }
        return run(params, config, v);
    }
    let starts = initial_potentials(config)?;
    let runs: Vec<Result<SCFReport>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            run(params, config, v).map(|mut r| {
                r.start = Some(i);
                r
            })
        })
        .collect();
    let mut best: Option<SCFReport> = None;
    let mut first_err = None;
    for r in runs {
        match r {
            Ok(r) => {
                let better = match &best {
                    None => true,
                    Some(b) => (r.converged, r.objective) > (b.converged, b.objective),
                };
                if better {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or(Error::NoBoundStates))
}

/// Report for `v` as it stands: spectra, levels, EL residual and flags, with
/// no mixing steps. `converged` is always false since nothing was iterated.
pub fn assess_potential(params: &ProblemParams, config: &SCFConfig, v: &RadialPotential) -> Result<SCFReport> {
    if *v.grid() != config.grid {
        return Err(Error::InvalidPotential("potential lives on a different grid".into()));
    }
    run(params, &SCFConfig { max_iters: 0, ..*config }, v)
}

fn run(params: &ProblemParams, config: &SCFConfig, v0: &RadialPotential) -> Result<SCFReport> {
    let mut cur = evaluate(v0, params, &config.spectral)?;
    if cur.spectra.is_empty() {
        return Err(Error::NoBoundStates);
    }
    let mut alpha = config.alpha0;
    let mut trace = Vec::new();
    let mut last_change = f64::INFINITY;
    let mut termination = Termination::MaxIterations;
    let mut residual;
    let mut iterations = 0;
    loop {
        let target = el_map_from(&cur.potential, &cur.spectra, params)?;
        residual = lt_distance(&cur.potential, &target, params);
        trace.push(TraceEntry { iteration: iterations, objective: cur.objective, residual, alpha });
        if last_change <= config.tol_obj && residual <= config.tol_residual {
            termination = Termination::Converged;
            break;
        }
        if iterations >= config.max_iters {
            break;
        }
        iterations += 1;

        let next = loop {
            let trial = cur.potential.mix(&target, alpha)?;
            let accepted = match evaluate(&trial, params, &config.spectral) {
                Ok(e) if !e.spectra.is_empty() => {
                    if !config.ascent_safeguard || e.objective >= cur.objective - ASCENT_SLACK {
                        Some(e)
                    } else {
                        None
                    }
                }
                Ok(_) | Err(Error::NoBoundStates) => None,
                Err(e) => return Err(e),
            };
            if let Some(e) = accepted {
                break Some(e);
            }
            alpha *= 0.5;
            if alpha < MIN_ALPHA {
                break None;
            }
        };
        let Some(next) = next else {
            termination = Termination::Stalled;
            break;
        };
        last_change = (next.objective - cur.objective).abs() / cur.objective.max(f64::MIN_POSITIVE);
        cur = next;
        alpha = (alpha * 1.2).min(config.alpha0);
    }

    let occupation = assign_occupations(&cur.spectra, params);
    let boundary_mass = cur
        .spectra
        .iter()
        .map(|s| s.max_boundary_mass())
        .fold(0.0, f64::max);
    let converged = termination == Termination::Converged;
    let mut flags = Vec::new();
    if converged && occupation.partial {
        flags.push("gap violation suspected: converged with a partially filled shell".to_string());
    }
    if boundary_mass > CONTAMINATION_LIMIT {
        flags.push(format!("boundary contamination: edge mass fraction {boundary_mass:.3e}, enlarge the grid"));
    }
    let gap = cur.levels.next.map(|next| next - cur.levels.levels[params.rank - 1]);
    Ok(SCFReport {
        params: *params,
        converged,
        termination,
        iterations,
        potential: cur.potential,
        levels: cur.levels,
        objective: cur.objective,
        el_residual: residual,
        gap,
        trace,
        boundary_mass,
        grid: config.grid,
        occupation,
        flags,
        start: None,
        spectra: cur.spectra,
    })
}
