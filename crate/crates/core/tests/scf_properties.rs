use std::sync::OnceLock;

use hardy_lt::diagnostics::{
    compare_couplings, decay_check, duality_check, gap_check, mass_profile, padding_monotonicity, scaling_check,
    DualityOutcome,
};
use hardy_lt::groundstate::shoot_ground_state;
use hardy_lt::scf::{
    assign_occupations, density_from, el_map, el_residual, evaluate_candidate, scf_optimize, SCFConfig, SCFReport,
};
use hardy_lt::spectral::{negative_spectrum, SpectralSettings};
use hardy_lt::{build_grid, normalize_potential, Error, LogGrid, ProblemParams, RadialPotential};
use proptest::prelude::*;

fn reference_grid() -> LogGrid {
    build_grid(-12.0, 6.0, 1801).unwrap()
}

fn critical(n: usize) -> ProblemParams {
    ProblemParams::critical(3, 1.0, n).unwrap()
}

fn config() -> SCFConfig {
    let mut cfg = SCFConfig::new(reference_grid());
    cfg.starts = 9;
    cfg
}

fn rank_one() -> &'static SCFReport {
    static R: OnceLock<SCFReport> = OnceLock::new();
    R.get_or_init(|| scf_optimize(&critical(1), &config(), None).unwrap())
}

/// The normalized rank-one optimizer `k^2 Q(k x)^{m-2}`, `k = C1^{1/(2s)}`, on the
/// reference grid. `Q` is shot on the grid shifted by `ln k` with four times the
/// resolution, so no interpolation is needed.
fn oracle_potential() -> (RadialPotential, f64) {
    static V: OnceLock<(RadialPotential, f64)> = OnceLock::new();
    V.get_or_init(|| {
        let p = critical(1);
        let c1 = {
            let gs = shoot_ground_state(&p, &build_grid(-16.0, 6.0, 8001).unwrap(), 1e-8).unwrap();
            1.0 / gs.int_qm
        };
        let lnk = c1.ln() / (2.0 * p.s);
        let g = reference_grid();
        let fine = build_grid(g.t_min() + lnk, g.t_max() + lnk, 4 * (g.len() - 1) + 1).unwrap();
        let gs = shoot_ground_state(&p, &fine, 1e-8).unwrap();
        let k2 = (2.0 * lnk).exp();
        let vals: Vec<f64> = gs.potential().unwrap().values().iter().step_by(4).map(|x| k2 * x).collect();
        let v = RadialPotential::new(g, vals).unwrap();
        assert!((v.lt_norm(&p) - 1.0).abs() < 1e-6);
        (normalize_potential(&v, &p).unwrap(), c1)
    })
    .clone()
}

#[test]
fn oracle_potential_is_a_fixed_point() {
    let p = critical(1);
    let settings = SpectralSettings::default();
    let (v, _) = oracle_potential();
    let mapped = el_map(&v, &p, &settings).unwrap();
    let dev = v.values().iter().zip(mapped.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    // V grows like r^{-2/3} at the left edge, so the deviation is measured against max V
    assert!(dev / v.max() <= 1e-4, "sup deviation {dev}");
    assert!(el_residual(&v, &p, &settings).unwrap() <= 1e-4);
    assert!(mapped.values().iter().all(|&x| x >= 0.0));
    assert!((mapped.lt_norm(&p) - 1.0).abs() <= 1e-12);
    let scf = &rank_one().potential;
    let gap = v.values().iter().zip(scf.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap / v.max() <= 1e-3, "oracle vs optimizer {gap}");
}

#[test]
fn rank_one_bound_matches_oracle() {
    let r = rank_one();
    let (_, c1) = oracle_potential();
    assert!(r.converged);
    assert!((r.objective - c1).abs() / c1 <= 1e-3, "{} vs {c1}", r.objective);
    assert!(r.el_residual <= 1e-6);
    for pair in r.trace.windows(2) {
        assert!(pair[1].objective >= pair[0].objective - 1e-14 * pair[0].objective.abs().max(1.0));
    }
    let g = gap_check(r, 1e-10);
    assert!(g.passed && g.lambda1_multiplicity == 1);
}

#[test]
fn warm_start_is_monotone_in_rank() {
    let r1 = rank_one();
    let r2 = scf_optimize(&critical(2), &config(), Some(&r1.potential)).unwrap();
    assert!(r2.objective >= r1.objective - 1e-10);
    let settings = SpectralSettings::default();
    let (at_two, _) = evaluate_candidate(&r1.potential, &critical(2), &settings).unwrap();
    assert!(at_two >= r1.objective - 1e-12);
    assert!(r2.objective >= at_two - 1e-10);
}

#[test]
fn dilation_leaves_the_ratio_unchanged() {
    let p = critical(1);
    let settings = SpectralSettings::default();
    for shift in [-150, -40, -7] {
        let check = scaling_check(&rank_one().potential, shift, &p, &settings).unwrap();
        assert!(check.relative_change < 1e-8, "{check:?}");
    }
    let bump = RadialPotential::gaussian_bump(reference_grid(), 0.0, 0.7).unwrap();
    for shift in [-200, -30, 45, 180] {
        let check = scaling_check(&bump, shift, &p, &settings).unwrap();
        assert!(check.relative_change < 1e-8, "{check:?}");
        assert!(check.norm_factor_error < 1e-10, "{check:?}");
    }
}

#[test]
fn decay_is_at_least_the_bound() {
    let fit = decay_check(rank_one(), None).unwrap();
    assert!(fit.passed, "{fit:?}");
    assert!(decay_check(rank_one(), Some((1.0, 1e5))).is_err());
}

#[test]
fn optimizer_mass_is_tight() {
    let p = critical(1);
    let prof = mass_profile(&rank_one().potential, &p, &[0.5, 1.0, 4f64.exp(), 6f64.exp()]).unwrap();
    assert!(prof.windows(2).all(|w| w[1].1 >= w[0].1));
    assert!(prof[2].1 >= 0.999999);
    assert!((prof[3].1 - 1.0).abs() < 1e-15);
}

#[test]
fn duality_near_equality_at_the_optimizer() {
    let r = rank_one();
    let w = &r.spectra[0].eigenvectors[0];
    match duality_check(r.objective, Some((&r.grid, w)), &r.params).unwrap() {
        DualityOutcome::Computed(rep) => assert!(rep.passed.unwrap(), "{rep:?}"),
        other => panic!("{other:?}"),
    }
    let refused = duality_check(r.objective, None, &ProblemParams::critical(3, 0.5, 2).unwrap()).unwrap();
    assert!(matches!(refused, DualityOutcome::Refused { .. }));
}

#[test]
fn identical_couplings_compare_equal() {
    let mut cfg = config();
    cfg.starts = 1;
    let cmp = compare_couplings(&critical(1), 0.25, 0.25, &cfg).unwrap();
    assert!(cmp.margin.abs() <= 1e-12);
    assert!(!cmp.asserted);
}

#[test]
fn flat_coupling_gives_a_smaller_bound() {
    let flat = ProblemParams::new(3, 0.0, 1.0, 1).unwrap();
    let r = scf_optimize(&flat, &config(), None).unwrap();
    assert!(r.converged);
    assert!(rank_one().objective > r.objective);
}

#[test]
fn no_bound_state_is_an_error() {
    let p = ProblemParams::new(3, 0.0, 1.0, 1).unwrap();
    let v = RadialPotential::from_fn(reference_grid(), |r| 1e-3 * (-(r.ln().powi(2))).exp()).unwrap();
    let err = el_map(&v, &p, &SpectralSettings::default()).unwrap_err();
    assert!(matches!(err, Error::NoBoundStates), "{err:?}");
}

#[test]
fn density_integral_matches_occupied_weights() {
    let grid = build_grid(-8.0, 5.0, 2601).unwrap();
    let v = RadialPotential::square_well(grid, 40.0, 1.0).unwrap();
    for s in [1.0, 2.0] {
        let p = ProblemParams::critical(3, s, 2).unwrap();
        let spectra = negative_spectrum(&v, &p, &SpectralSettings::default()).unwrap();
        let occ = assign_occupations(&spectra, &p);
        assert_eq!(occ.total, 2);
        let rho = density_from(&spectra, &occ, &p).unwrap();
        let want: f64 = occ
            .shells
            .iter()
            .map(|sh| sh.filled * sh.lambda.abs().powf(s - 1.0))
            .sum();
        // independent Simpson quadrature of 4 pi r^2 rho in r = e^t
        let f: Vec<f64> = (0..grid.len()).map(|j| 4.0 * std::f64::consts::PI * (3.0 * grid.t(j)).exp() * rho.values[j]).collect();
        let h = grid.h();
        let simpson = h / 3.0
            * (f[0] + f[f.len() - 1] + (1..f.len() - 1).map(|j| if j % 2 == 1 { 4.0 * f[j] } else { 2.0 * f[j] }).sum::<f64>());
        assert!((simpson - want).abs() / want < 1e-3, "s={s}: {simpson} vs {want}");
        assert!((rho.integral(3) - want).abs() / want < 1e-8, "s={s}: {} vs {want}", rho.integral(3));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn padding_never_lowers_the_objective(center in -1.5f64..0.5, width in 0.3f64..1.0, amp in 0.5f64..20.0, n in 1usize..5) {
        let grid = build_grid(-8.0, 5.0, 500).unwrap();
        let p = critical(n);
        let v = RadialPotential::from_fn(grid, |r| amp * (-((r.ln() - center) / width).powi(2)).exp()).unwrap();
        let (a, b) = padding_monotonicity(&v, &p, &SpectralSettings::default()).unwrap();
        prop_assert!(b >= a);
    }
}
