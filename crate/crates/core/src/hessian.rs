//! Central finite-difference Hessian.

use alloc::vec::Vec;

use crate::linalg::Matrix;

/// Per-coordinate step `step * max(1, |x_j|)`.
pub fn step_sizes(x: &[f64], step: f64) -> Vec<f64> {
    x.iter().map(|v| step * v.abs().max(1.0)).collect()
}

/// Hessian of `f` at `x` by central differences:
///
/// * diagonal: `(f(x + h_i) - 2 f(x) + f(x - h_i)) / h_i^2`
/// * off-diagonal: `(f(++) - f(+-) - f(-+) + f(--)) / (4 h_i h_j)`
///
/// The result is symmetric by construction.
pub fn central_hessian<F>(mut f: F, x: &[f64], step: f64) -> Matrix
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x.len();
    let h = step_sizes(x, step);
    let f0 = f(x);
    let mut point = x.to_vec();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        point[i] = x[i] + h[i];
        let fp = f(&point);
        point[i] = x[i] - h[i];
        let fm = f(&point);
        point[i] = x[i];
        out.set(i, i, (fp - 2.0 * f0 + fm) / (h[i] * h[i]));
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                point[i] = x[i] + si * h[i];
                point[j] = x[j] + sj * h[j];
                let v = f(&point);
                point[i] = x[i];
                point[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    out
}
