#![allow(dead_code)]

use hardy_lt::spectral::ChannelOperator;
use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;

/// `J_n(x) = (1/pi) int_0^pi cos(n tau - x sin tau) dtau`; the trapezoid rule
/// is spectrally accurate for this periodic integrand.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    let m = 400;
    let h = PI / m as f64;
    let f = |tau: f64| (n as f64 * tau - x * tau.sin()).cos();
    let mut sum = 0.5 * (f(0.0) + f(PI));
    for i in 1..m {
        sum += f(i as f64 * h);
    }
    sum * h / PI
}

/// `K_n(x) = int_0^inf exp(-x cosh u) cosh(n u) du` by Gauss-Legendre panels.
pub fn bessel_k(n: u32, x: f64) -> f64 {
    let upper = (1.0 + 800.0 / x).acosh() + 1.0;
    let panels = 200;
    let width = upper / panels as f64;
    let (nodes, weights) = gauss_legendre_8();
    let f = |u: f64| (-x * u.cosh()).exp() * (n as f64 * u).cosh();
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * width;
        for (z, w) in nodes.iter().zip(&weights) {
            sum += w * f(mid + 0.5 * width * z);
        }
    }
    sum * 0.5 * width
}

fn gauss_legendre_8() -> ([f64; 8], [f64; 8]) {
    let x = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
    let w = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
    (
        [-x[3], -x[2], -x[1], -x[0], x[0], x[1], x[2], x[3]],
        [w[3], w[2], w[1], w[0], w[0], w[1], w[2], w[3]],
    )
}

/// Lowest eigenvalue of `-Delta - 1/(4r^2) - V0 1_{r<=1}` in `d = 3`, `ell = 0`,
/// from matching the log-derivatives of `sqrt(r) J0(k r)` and `sqrt(r) K0(kappa r)`
/// at `r = 1` with `k^2 = V0 + lambda`, `kappa^2 = -lambda`.
pub fn square_well_ground_level(v0: f64) -> f64 {
    let mismatch = |lambda: f64| {
        let k = (v0 + lambda).sqrt();
        let kappa = (-lambda).sqrt();
        -k * bessel_j(1, k) / bessel_j(0, k) + kappa * bessel_k(1, kappa) / bessel_k(0, kappa)
    };
    // first zero of J0 bounds k for the ground state
    let j01 = 2.404_825_557_695_773;
    let mut lo = -v0 + 1e-9;
    let mut hi = (j01 * j01 - v0).min(-1e-9) - 1e-9;
    assert!(mismatch(lo) * mismatch(hi) < 0.0, "no sign change for V0 = {v0}");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mismatch(lo) * mismatch(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All eigenvalues of `B^{-1/2} A B^{-1/2}` from a dense symmetric solve, ascending.
pub fn dense_eigenvalues(op: &ChannelOperator) -> Vec<f64> {
    let m = op.len();
    let s: Vec<f64> = op.weight.iter().map(|w| 1.0 / w.sqrt()).collect();
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        a[(i, i)] = op.stiffness_diag[i] * s[i] * s[i];
        if i + 1 < m {
            let v = op.stiffness_off[i] * s[i] * s[i + 1];
            a[(i, i + 1)] = v;
            a[(i + 1, i)] = v;
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
