//! Exhaustive minimizer of the l0-penalized exponential loss for tiny
//! instances. Test-scale only.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::augment::AugmentedMatrix;
use crate::error::{Error, Result};
use crate::linalg::solve_psd;
use crate::model::{exp_loss, signed_label, ModelParams, COEF_CLAMP};

pub const MAX_COLUMNS: usize = 20;
pub const MAX_SUPPORT: usize = 4;

const GRAD_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 500;

/// Loss, gradient and Hessian of the restricted problem over
/// `theta = (bias, gamma_S)`.
pub struct Restricted<'a> {
    x: &'a AugmentedMatrix,
    support: &'a [usize],
    y: Vec<f64>,
    /// Dense active flags per support column.
    bits: Vec<Vec<bool>>,
}

impl<'a> Restricted<'a> {
    pub fn new(x: &'a AugmentedMatrix, labels: &[u8], support: &'a [usize]) -> Self {
        Restricted {
            x,
            support,
            y: labels.iter().map(|&l| signed_label(l)).collect(),
            bits: support.iter().map(|&c| x.column_bits(c)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.support.len() + 1
    }

    fn features(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        core::iter::once(1.0).chain(self.bits.iter().map(move |b| if b[i] { 1.0 } else { 0.0 }))
    }

    fn weights(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.x.n_rows())
            .map(|i| {
                let s: f64 = self.features(i).zip(theta).map(|(z, t)| z * t).sum();
                exp_loss(self.y[i] * s)
            })
            .collect()
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        self.weights(theta).iter().sum::<f64>() / self.x.n_rows() as f64
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.x.n_rows() as f64;
        let w = self.weights(theta);
        let mut g = vec![0.0; self.dim()];
        for (i, wi) in w.iter().enumerate() {
            for (k, z) in self.features(i).enumerate() {
                g[k] -= self.y[i] * wi * z / n;
            }
        }
        g
    }

    fn hessian(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        let n = self.x.n_rows() as f64;
        let w = self.weights(theta);
        let p = self.dim();
        let mut h = vec![vec![0.0; p]; p];
        for (i, wi) in w.iter().enumerate() {
            let z: Vec<f64> = self.features(i).collect();
            for a in 0..p {
                if z[a] == 0.0 {
                    continue;
                }
                for b in 0..p {
                    h[a][b] += wi * z[a] * z[b] / n;
                }
            }
        }
        h
    }

    /// Box-constrained damped Newton from the origin.
    pub fn minimize(&self) -> (Vec<f64>, f64) {
        let p = self.dim();
        let mut theta = vec![0.0; p];
        let mut f = self.loss(&theta);
        for _ in 0..MAX_NEWTON {
            let g = self.gradient(&theta);
            let free: Vec<usize> = (0..p)
                .filter(|&k| !((theta[k] <= -COEF_CLAMP && g[k] > 0.0) || (theta[k] >= COEF_CLAMP && g[k] < 0.0)))
                .collect();
            if free.iter().all(|&k| libm::fabs(g[k]) < GRAD_TOL) {
                break;
            }
            let h = self.hessian(&theta);
            let hf: Vec<Vec<f64>> = free.iter().map(|&a| free.iter().map(|&b| h[a][b]).collect()).collect();
            let rhs: Vec<f64> = free.iter().map(|&k| -g[k]).collect();
            let dir_free = solve_psd(&hf, &rhs);
            let mut dir = vec![0.0; p];
            for (idx, &k) in free.iter().enumerate() {
                dir[k] = dir_free[idx];
            }
            let mut step = 1.0;
            let mut improved = false;
            for _ in 0..80 {
                let cand: Vec<f64> = theta
                    .iter()
                    .zip(&dir)
                    .map(|(t, d)| (t + step * d).clamp(-COEF_CLAMP, COEF_CLAMP))
                    .collect();
                let fc = self.loss(&cand);
                if fc < f {
                    theta = cand;
                    f = fc;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        (theta, f)
    }
}

/// Visits supports by size, then lexicographically.
fn for_each_support(p: usize, max_k: usize, mut f: impl FnMut(&[usize])) {
    for k in 0..=max_k.min(p) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            f(&idx);
            let Some(i) = (0..k).rev().find(|&i| idx[i] < p - k + i) else {
                break;
            };
            idx[i] += 1;
            for t in i + 1..k {
                idx[t] = idx[t - 1] + 1;
            }
        }
    }
}

/// Global minimizer of `loss + lambda0 |S|` over `|S| <= max_support`.
/// Ties go to the smaller, then lexicographically smaller, support.
pub fn exact_fit(x: &AugmentedMatrix, labels: &[u8], lambda0: f64, max_support: usize) -> Result<ModelParams> {
    if x.n_cols() > MAX_COLUMNS || max_support > MAX_SUPPORT {
        return Err(Error::TooLarge(format!(
            "{} columns / support {max_support} exceed {MAX_COLUMNS} / {MAX_SUPPORT}; use solver::fit",
            x.n_cols()
        )));
    }
    if labels.len() != x.n_rows() || labels.is_empty() {
        return Err(Error::Dimension("labels and rows differ in length".into()));
    }
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    for_each_support(x.n_cols(), max_support, |s| {
        let (theta, loss) = Restricted::new(x, labels, s).minimize();
        let obj = loss + lambda0 * s.len() as f64;
        if best.as_ref().is_none_or(|(b, _, _)| obj < *b) {
            best = Some((obj, s.to_vec(), theta));
        }
    });
    let (_, support, theta) = best.expect("the empty support is always visited");
    let mut m = ModelParams::intercept(theta[0], lambda0);
    for (c, v) in support.iter().zip(&theta[1..]) {
        m.set_coef(*c, *v);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::objective;
    use alloc::vec::Vec;

    fn matrix(rows: &[&[u8]]) -> AugmentedMatrix {
        let dense: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect();
        AugmentedMatrix::from_dense(&dense).unwrap()
    }

    #[test]
    fn support_enumeration_order() {
        let mut seen = Vec::new();
        for_each_support(4, 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen.len(), 1 + 4 + 6);
        assert_eq!(seen[0], Vec::<usize>::new());
        assert_eq!(seen[1], [0]);
        assert_eq!(seen[5], [0, 1]);
        assert_eq!(seen[10], [2, 3]);
        let mut count = 0;
        for_each_support(2, 4, |_| count += 1);
        assert_eq!(count, 4);
    }

    #[test]
    fn huge_lambda_gives_closed_form_intercept() {
        let x = matrix(&[&[1, 0], &[0, 1], &[1, 1], &[0, 0]]);
        let m = exact_fit(&x, &[1, 1, 1, 0], 1e6, 2).unwrap();
        assert_eq!(m.sparsity(), 0);
        assert!((m.bias - 0.5 * 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn matches_hand_enumeration() {
        // Column 0 matches the labels on 7 of 8 rows, column 1 on 5 of 8.
        let y = [1, 1, 1, 1, 0, 0, 0, 0];
        let x = matrix(&[&[1, 1], &[1, 1], &[1, 0], &[1, 1], &[0, 1], &[0, 0], &[0, 0], &[1, 0]]);
        let supports = [vec![], vec![0], vec![1], vec![0, 1]];
        for lambda in [0.01, 0.05, 0.2, 5.0] {
            let objs: Vec<f64> = supports
                .iter()
                .map(|s| Restricted::new(&x, &y, s).minimize().1 + lambda * s.len() as f64)
                .collect();
            let arg = (0..4).fold(0, |b, i| if objs[i] < objs[b] { i } else { b });
            let m = exact_fit(&x, &y, lambda, 2).unwrap();
            assert_eq!(m.support(), supports[arg].as_slice());
            assert!((objective(&m, &x, &y, lambda).unwrap() - objs[arg]).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_columns_tie_to_lower_index() {
        let y = [1, 1, 0, 0, 1, 0];
        let x = matrix(&[&[1, 1], &[1, 1], &[0, 0], &[0, 0], &[0, 0], &[1, 1]]);
        let m = exact_fit(&x, &y, 0.01, 1).unwrap();
        assert_eq!(m.support(), [0]);
    }

    #[test]
    fn size_limits() {
        let rows: Vec<Vec<bool>> = (0..3).map(|i| (0..21).map(|c| (i + c) % 2 == 0).collect()).collect();
        let x = AugmentedMatrix::from_dense(&rows).unwrap();
        assert!(matches!(exact_fit(&x, &[1, 0, 1], 0.1, 2), Err(Error::TooLarge(_))));
        let x = matrix(&[&[1], &[0]]);
        assert!(matches!(exact_fit(&x, &[1, 0], 0.1, 5), Err(Error::TooLarge(_))));
    }

    #[test]
    fn separable_support_clamps() {
        let y = [1, 1, 0, 0];
        let x = matrix(&[&[1], &[1], &[0], &[0]]);
        let (theta, _) = Restricted::new(&x, &y, &[0]).minimize();
        assert!(theta.iter().all(|t| t.abs() <= COEF_CLAMP));
        assert!(theta[1] - theta[0] > 20.0);
    }
}
