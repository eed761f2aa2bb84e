//! Small dense linear algebra shared by the Newton solvers.

use alloc::vec;
use alloc::vec::Vec;

/// Solves `H d = r` for symmetric positive semi-definite `H`, treating
/// numerically null directions as zero (duplicate columns make `H`
/// singular).
pub(crate) fn solve_psd(h: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
    let p = r.len();
    let scale = (0..p)
        .map(|k| libm::fabs(h[k][k]))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    // Cholesky L L^T with skipped pivots.
    let mut l = vec![vec![0.0; p]; p];
    let mut live = vec![false; p];
    for j in 0..p {
        let diag = h[j][j] - l[j][..j].iter().map(|v| v * v).sum::<f64>();
        if diag <= 1e-13 * scale {
            continue;
        }
        live[j] = true;
        let ljj = libm::sqrt(diag);
        l[j][j] = ljj;
        for i in j + 1..p {
            let s = h[i][j] - l[i][..j].iter().zip(&l[j][..j]).map(|(a, b)| a * b).sum::<f64>();
            l[i][j] = s / ljj;
        }
    }
    let mut z = vec![0.0; p];
    for i in 0..p {
        if !live[i] {
            continue;
        }
        let mut s = r[i];
        for k in 0..i {
            s -= l[i][k] * z[k];
        }
        z[i] = s / l[i][i];
    }
    let mut d = vec![0.0; p];
    for i in (0..p).rev() {
        if !live[i] {
            continue;
        }
        let mut s = z[i];
        for k in i + 1..p {
            s -= l[k][i] * d[k];
        }
        d[i] = s / l[i][i];
    }
    d
}
