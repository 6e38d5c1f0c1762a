//! Adaptive Dormand-Prince 5(4) integrator for small first-order systems.

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MAX_STEPS_PER_CALL: usize = 1_000_000;

type State = [f64; 2];

fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Dormand-Prince stepper carrying its step size between calls.
pub struct Dopri5<F> {
    f: F,
    rtol: f64,
    atol: f64,
    h: f64,
    max_step: f64,
}

impl<F: Fn(f64, &State) -> State> Dopri5<F> {
    pub fn new(f: F, rtol: f64, atol: f64, max_step: f64) -> Self {
        Self { f, rtol, atol, h: max_step.min(1e-3), max_step }
    }

    /// Advances `y` from `t0` to `t1` with adaptive substeps.
    pub fn advance(&mut self, t0: f64, t1: f64, y: &mut State) -> Result<(), String> {
        let mut t = t0;
        let mut k1 = (self.f)(t, y);
        for _ in 0..MAX_STEPS_PER_CALL {
            let remaining = t1 - t;
            if remaining <= 0.0 {
                return Ok(());
            }
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            let k2 = (self.f)(t + C2 * h, &axpy(y, &[(A21, &k1)], h));
            let k3 = (self.f)(t + C3 * h, &axpy(y, &[(A31, &k1), (A32, &k2)], h));
            let k4 = (self.f)(t + C4 * h, &axpy(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
            let k5 = (self.f)(t + C5 * h, &axpy(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
            let k6 = (self.f)(t + h, &axpy(y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
            let y_new = axpy(y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
            let k7 = (self.f)(t + h, &y_new);
            let mut err: f64 = 0.0;
            for i in 0..2 {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / scale).abs());
            }
            if !err.is_finite() || !y_new.iter().all(|v| v.is_finite()) {
                self.h *= 0.1;
                if self.h < 1e-14 {
                    return Err("non-finite state".into());
                }
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                *y = y_new;
                k1 = k7;
                if !last {
                    self.h = (h * factor).min(self.max_step);
                }
            } else {
                self.h = h * factor.min(1.0);
                if self.h < 1e-14 {
                    return Err(format!("step size underflow at t = {t}"));
                }
            }
        }
        Err("too many steps".into())
    }
}
