//! Rank-one oracle: the radial positive solution `Q` of
//! `-Delta Q - c/|x|^2 Q - Q^{m-1} + Q = 0`, found by shooting.
//!
//! With `Q(r) = r^{-(d-2)/2} w(ln r)` the equation becomes
//! `w'' = (e^{2t} + nu^2) w - e^{sigma t} |w|^{m-2} w`, `sigma = 4s/(d-2+2s)`,
//! `nu^2 = (d-2)^2/4 - c`. The regular branch at `t -> -inf` is a one-parameter
//! family `w ~ a e^{nu t}`; `a` is fixed by bisection between trajectories that
//! cross zero and trajectories that turn upward.

pub mod bessel;
pub mod ode;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LogGrid;
use crate::params::{channel_strength, ProblemParams};
use crate::potential::RadialPotential;
use crate::spectral::{discretize_channel, lowest_eigenpairs};
use bessel::scaled_k;
use ode::Dopri5;

/// Default oracle grid.
pub const ORACLE_T_MIN: f64 = -16.0;
pub const ORACLE_T_MAX: f64 = 6.0;
pub const ORACLE_NODES: usize = 8001;

/// Width in `t` of the window where the integrated solution is blended into
/// the linear tail.
const BLEND_WIDTH: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingOptions {
    /// Search interval for the shooting parameter `a`.
    pub bracket: (f64, f64),
    /// Log-spaced probes used to locate the sign change.
    pub scan_points: usize,
    pub rtol: f64,
    /// The far field is replaced by the linear tail once the nonlinear term
    /// is this small relative to the linear one.
    pub match_ratio: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { bracket: (1e-6, 1e6), scan_points: 25, rtol: 1e-14, match_ratio: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    pub params: ProblemParams,
    pub grid: LogGrid,
    pub w_values: Vec<f64>,
    /// Shooting parameter, `lim w(t) e^{-nu t}` as `t -> -inf`.
    pub a: f64,
    /// Max nodal defect of the ODE.
    pub ode_residual: f64,
    pub tol: f64,
    /// `int Q^m dx`.
    pub int_qm: f64,
    /// `int Q^2 dx`.
    pub int_q2: f64,
    /// Where the integrated solution hands over to the linear tail.
    pub match_t: f64,
    /// Where the bracketing trajectories separate.
    pub diverge_t: f64,
}

impl GroundState {
    pub fn q_values(&self) -> Vec<f64> {
        let k = (self.params.d as f64 - 2.0) / 2.0;
        (0..self.grid.len()).map(|j| (-k * self.grid.t(j)).exp() * self.w_values[j]).collect()
    }

    /// `V = Q^{m-2}`, the unnormalized rank-one optimizer.
    pub fn potential(&self) -> Result<RadialPotential> {
        let m = self.params.exponents().m;
        let values = self.q_values().iter().map(|q| q.max(0.0).powf(m - 2.0)).collect();
        RadialPotential::new(self.grid, values)
    }
}

struct Equation {
    nu: f64,
    nu2: f64,
    sigma: f64,
    m: f64,
}

impl Equation {
    fn new(params: &ProblemParams) -> Self {
        let nu2 = channel_strength(params, 0);
        let e = params.exponents();
        let d = params.d as f64;
        Self { nu: nu2.sqrt(), nu2, sigma: 4.0 * params.s / (d - 2.0 + 2.0 * params.s), m: e.m }
    }

    fn nonlinear(&self, t: f64, w: f64) -> f64 {
        (self.sigma * t).exp() * w.abs().powf(self.m - 2.0) * w
    }

    fn rhs(&self, t: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], ((2.0 * t).exp() + self.nu2) * y[0] - self.nonlinear(t, y[0])]
    }

    /// Regular branch near `t -> -inf` to first order in the forcing terms.
    fn initial(&self, a: f64, t: f64) -> [f64; 2] {
        let nu = self.nu;
        let kappa = self.sigma + (self.m - 2.0) * nu;
        let lin = (2.0 * t).exp() / (4.0 + 4.0 * nu);
        let non = a.powf(self.m - 2.0) * (kappa * t).exp() / (kappa * kappa + 2.0 * nu * kappa);
        let delta = lin - non;
        let ddelta = 2.0 * lin - kappa * non;
        let base = a * (nu * t).exp();
        [base * (1.0 + delta), base * (nu * (1.0 + delta) + ddelta)]
    }

    /// `e^{sigma t} |w|^{m-2} / (e^{2t} + nu^2)`.
    fn nonlinear_ratio(&self, t: f64, w: f64) -> f64 {
        (self.sigma * t).exp() * w.abs().powf(self.m - 2.0) / ((2.0 * t).exp() + self.nu2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shot {
    /// `w` reached zero: `a` too large.
    Over,
    /// `w` turned upward: `a` too small.
    Under,
}

fn shoot(eq: &Equation, grid: &LogGrid, a: f64, rtol: f64) -> Result<(Shot, Vec<[f64; 2]>)> {
    let mut y = eq.initial(a, grid.t(0));
    let mut traj = vec![y];
    let mut stepper = Dopri5::new(|t, y: &[f64; 2]| eq.rhs(t, y), rtol, 1e-300, grid.h());
    let turn_radius = 2.0 * eq.nu + 4.0;
    let mut slope_was_negative = y[1] < 0.0;
    for j in 1..grid.len() {
        let (t0, t1) = (grid.t(j - 1), grid.t(j));
        stepper.advance(t0, t1, &mut y).map_err(|reason| Error::Integration { t: t0, reason })?;
        traj.push(y);
        if y[0] <= 0.0 {
            return Ok((Shot::Over, traj));
        }
        if y[1] > 0.0 && (slope_was_negative || t1.exp() > turn_radius) {
            return Ok((Shot::Under, traj));
        }
        slope_was_negative |= y[1] < 0.0;
    }
    let verdict = if y[1] >= 0.0 { Shot::Under } else { Shot::Over };
    Ok((verdict, traj))
}

/// Shooting solve on `grid` with default options.
pub fn shoot_ground_state(params: &ProblemParams, grid: &LogGrid, tol: f64) -> Result<GroundState> {
    shoot_ground_state_with(params, grid, tol, &ShootingOptions::default())
}

pub fn shoot_ground_state_with(
    params: &ProblemParams,
    grid: &LogGrid,
    tol: f64,
    options: &ShootingOptions,
) -> Result<GroundState> {
    if params.rank != 1 {
        return Err(Error::InvalidParams("the shooting oracle is a rank-one construction (N = 1)".into()));
    }
    let eq = Equation::new(params);
    let (lo0, hi0) = options.bracket;
    if !(lo0 > 0.0 && hi0 > lo0) {
        return Err(Error::InvalidParams(format!("invalid shooting bracket [{lo0}, {hi0}]")));
    }

    // coarse log scan: expect Under below the root and Over above it
    let probes = options.scan_points.max(2);
    let ratio = (hi0 / lo0).ln();
    let mut verdicts = Vec::with_capacity(probes);
    for k in 0..probes {
        let a = lo0 * (ratio * k as f64 / (probes - 1) as f64).exp();
        verdicts.push((a, shoot(&eq, grid, a, options.rtol)?.0));
    }
    let flips = verdicts.windows(2).filter(|w| w[0].1 != w[1].1).count();
    let first_over = verdicts.iter().position(|v| v.1 == Shot::Over);
    let (mut lo, mut hi) = match (flips, first_over) {
        (0, _) => return Err(Error::BracketNotFound { lo: lo0, hi: hi0 }),
        (1, Some(k)) if k > 0 => (verdicts[k - 1].0, verdicts[k].0),
        _ => {
            let pattern: String = verdicts.iter().map(|v| if v.1 == Shot::Over { 'O' } else { 'U' }).collect();
            return Err(Error::AmbiguousShooting(format!(
                "non-monotone classification over the log scan (U = turns up, O = hits zero): {pattern}"
            )));
        }
    };

    let (mut traj_lo, mut traj_hi) = (shoot(&eq, grid, lo, options.rtol)?.1, shoot(&eq, grid, hi, options.rtol)?.1);
    while hi / lo - 1.0 > 4.0 * f64::EPSILON {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let (shot, traj) = shoot(&eq, grid, mid, options.rtol)?;
        match shot {
            Shot::Under => {
                lo = mid;
                traj_lo = traj;
            }
            Shot::Over => {
                hi = mid;
                traj_hi = traj;
            }
        }
    }
    let a = (lo * hi).sqrt();
    assemble(params, &eq, grid, a, &traj_lo, &traj_hi, tol, options)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    params: &ProblemParams,
    eq: &Equation,
    grid: &LogGrid,
    a: f64,
    lo: &[[f64; 2]],
    hi: &[[f64; 2]],
    tol: f64,
    options: &ShootingOptions,
) -> Result<GroundState> {
    let common = lo.len().min(hi.len());
    let wmax = lo[..common].iter().map(|y| y[0]).fold(0.0, f64::max);
    let diverge = (0..common).find(|&j| (lo[j][0] - hi[j][0]).abs() > 1e-8 * wmax).unwrap_or(common);
    let mean: Vec<f64> = (0..diverge).map(|j| 0.5 * (lo[j][0] + hi[j][0])).collect();
    let peak = mean
        .iter()
        .enumerate()
        .fold(0, |best, (j, &w)| if w > mean[best] { j } else { best });
    let matched = (peak..diverge)
        .find(|&j| eq.nonlinear_ratio(grid.t(j), mean[j]) <= options.match_ratio)
        .unwrap_or(diverge.saturating_sub(1));
    if matched == 0 {
        return Err(Error::Integration { t: grid.t(0), reason: "trajectories separate immediately".into() });
    }

    // blend into the linear tail over a short window so no slope kink remains
    let blend_end = {
        let want = grid.t(matched) + BLEND_WIDTH;
        (matched..diverge).take_while(|&j| grid.t(j) <= want).last().unwrap_or(matched)
    };
    let tm = grid.t(matched);
    let tb = grid.t(blend_end);
    let (xm, wm) = (tm.exp(), mean[matched]);
    let km = scaled_k(eq.nu, xm);
    let tail = |t: f64| {
        let x = t.exp();
        wm * scaled_k(eq.nu, x) / km * (-(x - xm)).exp()
    };
    let w_values: Vec<f64> = (0..grid.len())
        .map(|j| {
            let t = grid.t(j);
            if j <= matched {
                mean[j]
            } else if j < blend_end {
                let x = (t - tm) / (tb - tm);
                let chi = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
                (1.0 - chi) * mean[j] + chi * tail(t)
            } else {
                tail(t)
            }
        })
        .collect();

    let mut gs = GroundState {
        params: *params,
        grid: *grid,
        w_values,
        a,
        ode_residual: 0.0,
        tol,
        int_qm: 0.0,
        int_q2: 0.0,
        match_t: tm,
        diverge_t: grid.t(diverge.min(grid.len() - 1)),
    };
    let q = gs.q_values();
    let m = eq.m;
    gs.int_qm = grid.integrate_radial(&q.iter().map(|v| v.abs().powf(m)).collect::<Vec<_>>(), params.d);
    gs.int_q2 = grid.integrate_radial(&q.iter().map(|v| v * v).collect::<Vec<_>>(), params.d);
    gs.ode_residual = verify_ground_state(&gs, params).max_residual;
    Ok(gs)
}

/// Result of [`verify_ground_state`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundCheck {
    pub max_residual: f64,
    /// `w > 0` on the interior (excluding an underflowed far tail).
    pub positive: bool,
    /// `w` nonincreasing beyond its maximum.
    pub monotone_tail: bool,
    /// `|w(t_min) - w(t_min + 10 h)| <= 1e-6 a`-type flatness, relative to `max w`.
    pub flat_left: bool,
}

impl GroundCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_residual <= tol && self.positive && self.monotone_tail
    }
}

const STENCIL: [f64; 7] = [1.0 / 90.0, -3.0 / 20.0, 3.0 / 2.0, -49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];

/// Max nodal defect of `-w'' + (e^{2t} + nu^2) w - e^{sigma t} |w|^{m-2} w`,
/// with `w''` from the 7-point central difference, plus shape checks.
pub fn verify_ground_state(gs: &GroundState, params: &ProblemParams) -> GroundCheck {
    let eq = Equation::new(params);
    let grid = &gs.grid;
    let w = &gs.w_values;
    let n = w.len();
    let h2 = grid.h() * grid.h();
    let mut max_residual: f64 = 0.0;
    for j in 3..n.saturating_sub(3) {
        let t = grid.t(j);
        let second: f64 = STENCIL.iter().enumerate().map(|(k, c)| c * w[j + k - 3]).sum::<f64>() / h2;
        let r = -second + ((2.0 * t).exp() + eq.nu2) * w[j] - eq.nonlinear(t, w[j]);
        max_residual = max_residual.max(r.abs());
    }
    let wmax = w.iter().copied().fold(0.0, f64::max);
    let peak = w.iter().position(|&x| x == wmax).unwrap_or(0);
    let positive = wmax > 0.0 && w[..n - 1].iter().all(|&x| x > 0.0 || x.abs() < 1e-290);
    let monotone_tail = wmax > 0.0 && w[peak..].windows(2).all(|p| p[1] <= p[0]);
    let flat_left = n > 10 && (w[0] - w[10]).abs() <= 1e-6 * wmax.max(f64::MIN_POSITIVE);
    GroundCheck { max_residual, positive, monotone_tail, flat_left }
}

/// Rank-one constants derived from the ground state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundReport {
    /// `1 / int Q^m dx`.
    pub c1: f64,
    pub c_hgn: f64,
    /// `(2s/(2s+d))^s (d/(2s+d))^{d/2}`.
    pub k_constant: f64,
    /// Lowest eigenvalue of `-Delta - c/|x|^2 - Q^{m-2}`; exactly `-1` in the continuum.
    pub lambda1_check: f64,
    /// Fitted exponential rate of `Q^{m-2}` in `r`.
    pub decay_rate_fit: Option<f64>,
    pub int_qm: f64,
    pub a: f64,
}

pub fn k_constant(params: &ProblemParams) -> f64 {
    let (d, s) = (params.d as f64, params.s);
    (2.0 * s / (2.0 * s + d)).powf(s) * (d / (2.0 * s + d)).powf(d / 2.0)
}

/// `C_HGN` from `C1 = K C_HGN^{-2m/(m-2)}`.
pub fn c_hgn_from_c1(c1: f64, params: &ProblemParams) -> f64 {
    let m = params.exponents().m;
    (c1 / k_constant(params)).powf(-(m - 2.0) / (2.0 * m))
}

pub fn c1_from_c_hgn(c_hgn: f64, params: &ProblemParams) -> f64 {
    let m = params.exponents().m;
    k_constant(params) * c_hgn.powf(-2.0 * m / (m - 2.0))
}

pub fn c1_from_ground_state(gs: &GroundState, params: &ProblemParams) -> Result<GroundReport> {
    let c1 = 1.0 / gs.int_qm;
    let v = gs.potential()?;
    let op = discretize_channel(&v, 0, params)?;
    let spec = lowest_eigenpairs(&op, 1, 1e-12)?;
    let lambda1_check = spec.eigenvalues.first().copied().unwrap_or(0.0);
    let decay_rate_fit = crate::diagnostics::fit_decay_rate(&v).ok().map(|f| f.0);
    Ok(GroundReport {
        c1,
        c_hgn: c_hgn_from_c1(c1, params),
        k_constant: k_constant(params),
        lambda1_check,
        decay_rate_fit,
        int_qm: gs.int_qm,
        a: gs.a,
    })
}

/// Least-squares slope of `ln(r^{(d-1)/2} Q)` against `r` on `[r_lo, r_hi]`.
/// The prefactor removes the algebraic part of `Q ~ r^{-(d-1)/2} e^{-r}`.
pub fn q_decay_slope(gs: &GroundState, r_lo: f64, r_hi: f64) -> Result<f64> {
    let q = gs.q_values();
    let k = (gs.params.d as f64 - 1.0) / 2.0;
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..gs.grid.len())
        .filter(|&j| (r_lo..=r_hi).contains(&gs.grid.r(j)) && q[j] > 0.0)
        .map(|j| {
            let r = gs.grid.r(j);
            (r, (r.powf(k) * q[j]).ln())
        })
        .unzip();
    if xs.len() < 20 {
        return Err(Error::DecayWindow(format!("only {} nodes in [{r_lo}, {r_hi}]", xs.len())));
    }
    Ok(crate::diagnostics::least_squares_slope(&xs, &ys))
}

/// Oracle on its own default grid.
pub fn default_oracle_grid() -> LogGrid {
    LogGrid::new(ORACLE_T_MIN, ORACLE_T_MAX, ORACLE_NODES).expect("static grid")
}
