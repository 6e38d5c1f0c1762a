//! Kernels for the symmetric tridiagonal pencil `(A, B)` with diagonal `B > 0`.

/// Number of eigenvalues of the pencil strictly below `sigma`.
///
/// Counts the negative pivots of the `LDL^T` factorization of `A - sigma B`
/// (Sylvester inertia). `A - sigma B` is formed entrywise, so no scaling by
/// `B^{-1/2}` ever takes place.
pub fn count_below(diag: &[f64], off: &[f64], weight: &[f64], sigma: f64) -> usize {
    let pivmin = f64::MIN_POSITIVE * 1e10;
    let mut count = 0;
    let mut q = diag[0] - sigma * weight[0];
    for i in 0..diag.len() {
        if i > 0 {
            q = diag[i] - sigma * weight[i] - off[i - 1] * off[i - 1] / q;
        }
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// LU factorization of a general tridiagonal matrix with partial pivoting.
pub struct TridiagLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    /// Factors the matrix with sub-diagonal `sub`, diagonal `diag` and
    /// super-diagonal `sup`. Exactly singular pivots are replaced by a tiny
    /// value, which is what inverse iteration wants.
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Self {
        let n = diag.len();
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let scale = diag.iter().chain(sub).map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = f64::EPSILON * scale;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 1 < n - 1 {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = f64::EPSILON * scale;
        }
        Self { dl, d, du, du2, swapped }
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i] - self.dl[i] * b[i + 1];
                b[i] = b[i + 1];
                b[i + 1] = temp;
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}
