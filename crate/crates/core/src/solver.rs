//! l0-penalized exponential-loss fitting over boolean columns.
//!
//! Every move has a closed form because the columns are boolean: with the
//! rest of the model fixed, the best coefficient for column `c` is
//! `1/2 ln(W+ / W-)` where `W+-` sum the current sample weights of active
//! rows in each class. A sweep
//!
//! 1. visits every column in index order, re-optimizing or dropping
//!    in-support coefficients and admitting out-of-support ones whose loss
//!    reduction beats `lambda0`;
//! 2. re-fits the bias and polishes bias and support jointly by projected
//!    Newton steps;
//! 3. optionally tries one swap (drop `s`, add `j`), taking the first pair
//!    in lexicographic order that strictly lowers the objective.
//!
//! Fitting stops once a sweep changes neither support nor swaps and
//! improves the objective by less than `tol` (relative).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::augment::AugmentedMatrix;
use crate::error::{Error, Result};
use crate::linalg::solve_psd;
use crate::model::{exp_loss, signed_label, ModelParams, COEF_CLAMP};

/// Polishing stops when no coefficient moves by more than this.
const POLISH_TOL: f64 = 1e-12;
const POLISH_MAX_ITERS: usize = 100;
/// Slack for judging a warm start already converged.
const STATIONARY_TOL: f64 = 1e-10;
/// Relative margin a swap must clear to count as a strict decrease.
const SWAP_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub lambda0: f64,
    pub max_support_size: usize,
    pub max_sweeps: usize,
    pub tol: f64,
    pub swap_search: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda0: 0.01,
            max_support_size: 100,
            max_sweeps: 200,
            tol: 1e-9,
            swap_search: true,
        }
    }
}

impl FitConfig {
    pub fn with_lambda(self, lambda0: f64) -> Self {
        FitConfig { lambda0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return Err(Error::Config(format!(
                "lambda0 = {} must be finite and >= 0",
                self.lambda0
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Config("tol must be > 0".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    /// Warm start was already a local optimum and was returned unchanged.
    WarmStartOptimal,
    MaxSweeps,
    /// Only one class present: intercept-only model with clamped bias.
    SingleClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub params: ModelParams,
    pub status: FitStatus,
    /// Objective before the first sweep and after each sweep.
    pub objectives: Vec<f64>,
}

/// Closed-form coordinate minimizer `1/2 ln(W+/W-)`, clamped to
/// `+-COEF_CLAMP`. One-sided weight (perfect separation on the active rows)
/// returns the clamp; an inactive column returns 0.
pub fn coef_step(w_plus: f64, w_minus: f64) -> f64 {
    match (w_plus > 0.0, w_minus > 0.0) {
        (false, false) => 0.0,
        (true, false) => COEF_CLAMP,
        (false, true) => -COEF_CLAMP,
        (true, true) => (0.5 * libm::log(w_plus / w_minus)).clamp(-COEF_CLAMP, COEF_CLAMP),
    }
}

/// Best coefficient for a boolean column given per-row weights
/// `w_i = exp(-y~_i s_i)` computed without that column.
pub fn optimal_coef(column: &[bool], sample_weights: &[f64], labels: &[u8]) -> f64 {
    let (mut wp, mut wm) = (0.0, 0.0);
    for ((&on, &w), &y) in column.iter().zip(sample_weights).zip(labels) {
        if on {
            if y == 1 {
                wp += w;
            } else {
                wm += w;
            }
        }
    }
    coef_step(wp, wm)
}

/// Reduction of the weight sum on active rows when moving the coefficient
/// from 0 to `delta`: `W+ (1 - e^-delta) + W- (1 - e^delta)`.
fn weight_drop(wp: f64, wm: f64, delta: f64) -> f64 {
    if wp > 0.0 && wm > 0.0 && delta.abs() < COEF_CLAMP {
        let d = libm::sqrt(wp) - libm::sqrt(wm);
        d * d
    } else {
        -wp * libm::expm1(-delta) - wm * libm::expm1(delta)
    }
}

struct State<'a> {
    x: &'a AugmentedMatrix,
    y: Vec<f64>,
    n: f64,
    scores: Vec<f64>,
    w: Vec<f64>,
    coef: Vec<f64>,
    /// Ascending column indices with nonzero coefficient.
    support: Vec<usize>,
    bias: f64,
}

enum Move {
    Keep(f64),
    Drop,
    Enter(f64),
    Stay,
}

impl<'a> State<'a> {
    fn new(x: &'a AugmentedMatrix, labels: &[u8], init: Option<&ModelParams>) -> Self {
        let mut coef = vec![0.0; x.n_cols()];
        let mut bias = 0.0;
        if let Some(m) = init {
            bias = m.bias.clamp(-COEF_CLAMP, COEF_CLAMP);
            for (&c, &v) in m.coefficients() {
                coef[c] = v.clamp(-COEF_CLAMP, COEF_CLAMP);
            }
        }
        let support = (0..x.n_cols()).filter(|&c| coef[c] != 0.0).collect();
        let mut st = State {
            x,
            y: labels.iter().map(|&l| signed_label(l)).collect(),
            n: labels.len() as f64,
            scores: vec![0.0; labels.len()],
            w: vec![0.0; labels.len()],
            coef,
            support,
            bias,
        };
        st.refresh();
        st
    }

    /// Recomputes scores and weights from the coefficients.
    fn refresh(&mut self) {
        self.scores.iter_mut().for_each(|s| *s = self.bias);
        for &c in &self.support {
            let v = self.coef[c];
            for &r in self.x.active_rows(c) {
                self.scores[r as usize] += v;
            }
        }
        for i in 0..self.w.len() {
            self.w[i] = exp_loss(self.y[i] * self.scores[i]);
        }
    }

    fn total_weight(&self) -> f64 {
        self.w.iter().sum()
    }

    fn loss(&self) -> f64 {
        self.total_weight() / self.n
    }

    fn objective(&self, lambda0: f64) -> f64 {
        self.loss() + lambda0 * self.support.len() as f64
    }

    /// `(W+, W-)` over the active rows of `c`, with `c`'s own contribution
    /// removed.
    fn class_weights(&self, c: usize) -> (f64, f64) {
        let own = self.coef[c];
        let (mut wp, mut wm) = (0.0, 0.0);
        for &r in self.x.active_rows(c) {
            let r = r as usize;
            let w = if own == 0.0 {
                self.w[r]
            } else {
                exp_loss(self.y[r] * (self.scores[r] - own))
            };
            if self.y[r] > 0.0 {
                wp += w;
            } else {
                wm += w;
            }
        }
        (wp, wm)
    }

    fn set_coef(&mut self, c: usize, value: f64) {
        let delta = value - self.coef[c];
        if delta == 0.0 {
            return;
        }
        for &r in self.x.active_rows(c) {
            let r = r as usize;
            self.scores[r] += delta;
            self.w[r] = exp_loss(self.y[r] * self.scores[r]);
        }
        let was = self.coef[c] != 0.0;
        self.coef[c] = value;
        match (was, value != 0.0) {
            (false, true) => {
                let pos = self.support.partition_point(|&s| s < c);
                self.support.insert(pos, c);
            }
            (true, false) => self.support.retain(|&s| s != c),
            _ => {}
        }
    }

    /// Closed-form bias step; returns the change applied.
    fn bias_step(&mut self) -> f64 {
        let (mut wp, mut wm) = (0.0, 0.0);
        for (w, y) in self.w.iter().zip(&self.y) {
            if *y > 0.0 {
                wp += w;
            } else {
                wm += w;
            }
        }
        let target = (self.bias + coef_step(wp, wm)).clamp(-COEF_CLAMP, COEF_CLAMP);
        let delta = target - self.bias;
        if delta != 0.0 {
            self.bias = target;
            for i in 0..self.scores.len() {
                self.scores[i] += delta;
                self.w[i] = exp_loss(self.y[i] * self.scores[i]);
            }
        }
        delta
    }

    fn proposed_move(&self, c: usize, cfg: &FitConfig) -> Move {
        let (wp, wm) = self.class_weights(c);
        let delta = coef_step(wp, wm);
        let gain = weight_drop(wp, wm, delta) / self.n;
        let in_support = self.coef[c] != 0.0;
        match (in_support, gain > cfg.lambda0) {
            (true, true) => Move::Keep(delta),
            (true, false) => Move::Drop,
            (false, true) if self.support.len() < cfg.max_support_size && delta != 0.0 => Move::Enter(delta),
            (false, _) => Move::Stay,
        }
    }

    /// Minimizes the loss over bias and support coefficients by projected
    /// Newton steps; coordinates pinned at the clamp with an outward
    /// gradient stay fixed.
    fn polish(&mut self) {
        let n = self.w.len();
        let p = self.support.len() + 1;
        // rows[i]: positions (1-based, 0 is the bias) of support columns active on row i
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (a, &c) in self.support.iter().enumerate() {
            for &r in self.x.active_rows(c) {
                rows[r as usize].push(a + 1);
            }
        }
        let theta_of = |st: &Self| -> Vec<f64> {
            core::iter::once(st.bias)
                .chain(st.support.iter().map(|&c| st.coef[c]))
                .collect()
        };
        let mut theta = theta_of(self);
        for _ in 0..POLISH_MAX_ITERS {
            let mut g = vec![0.0; p];
            let mut h = vec![vec![0.0; p]; p];
            for ((row, &w), &y) in rows.iter().zip(&self.w).zip(&self.y) {
                let yw = y * w;
                g[0] -= yw;
                h[0][0] += w;
                for &a in row {
                    g[a] -= yw;
                    h[0][a] += w;
                    h[a][0] += w;
                    for &b in row {
                        h[a][b] += w;
                    }
                }
            }
            let free: Vec<usize> = (0..p)
                .filter(|&k| !((theta[k] <= -COEF_CLAMP && g[k] > 0.0) || (theta[k] >= COEF_CLAMP && g[k] < 0.0)))
                .collect();
            if free.is_empty() {
                break;
            }
            let hf: Vec<Vec<f64>> = free.iter().map(|&a| free.iter().map(|&b| h[a][b]).collect()).collect();
            let rhs: Vec<f64> = free.iter().map(|&k| -g[k]).collect();
            let step_free = solve_psd(&hf, &rhs);
            let mut dir = vec![0.0; p];
            for (idx, &k) in free.iter().enumerate() {
                dir[k] = step_free[idx];
            }
            if dir.iter().all(|d| libm::fabs(*d) <= POLISH_TOL) {
                break;
            }
            let current = self.total_weight();
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let cand: Vec<f64> = theta
                    .iter()
                    .zip(&dir)
                    .map(|(v, d)| (v + t * d).clamp(-COEF_CLAMP, COEF_CLAMP))
                    .collect();
                let scores: Vec<f64> = (0..n)
                    .map(|i| {
                        let moved: f64 = rows[i].iter().map(|&a| cand[a] - theta[a]).sum();
                        self.scores[i] + (cand[0] - theta[0]) + moved
                    })
                    .collect();
                let total: f64 = (0..n).map(|i| exp_loss(self.y[i] * scores[i])).sum();
                if total <= current {
                    accepted = Some(cand);
                    break;
                }
                t *= 0.5;
            }
            let Some(cand) = accepted else { break };
            let moved = cand
                .iter()
                .zip(&theta)
                .map(|(a, b)| libm::fabs(a - b))
                .fold(0.0, f64::max);
            self.bias = cand[0];
            for (a, &c) in self.support.iter().enumerate() {
                self.coef[c] = cand[a + 1];
            }
            self.refresh();
            theta = cand;
            if moved <= POLISH_TOL {
                break;
            }
        }
        // A coefficient that lands exactly on zero leaves the support.
        let support = core::mem::take(&mut self.support);
        self.support = support.into_iter().filter(|&c| self.coef[c] != 0.0).collect();
    }

    /// First improving `(remove s, add j)` pair in lexicographic order.
    fn find_swap(&mut self) -> Option<(usize, usize, f64)> {
        let current = self.total_weight();
        let outside: Vec<usize> = (0..self.x.n_cols()).filter(|&c| self.coef[c] == 0.0).collect();
        let support = self.support.clone();
        for s in support {
            let own = self.coef[s];
            let saved: Vec<(usize, f64)> = self
                .x
                .active_rows(s)
                .iter()
                .map(|&r| (r as usize, self.w[r as usize]))
                .collect();
            for &(r, _) in &saved {
                self.w[r] = exp_loss(self.y[r] * (self.scores[r] - own));
            }
            let without_s = self.total_weight();
            let mut found = None;
            for &j in &outside {
                let (mut wp, mut wm) = (0.0, 0.0);
                for &r in self.x.active_rows(j) {
                    let r = r as usize;
                    if self.y[r] > 0.0 {
                        wp += self.w[r];
                    } else {
                        wm += self.w[r];
                    }
                }
                let delta = coef_step(wp, wm);
                if delta == 0.0 {
                    continue;
                }
                let swapped = without_s - weight_drop(wp, wm, delta);
                if swapped < current * (1.0 - SWAP_MARGIN) {
                    found = Some((s, j, delta));
                    break;
                }
            }
            for (r, w) in saved {
                self.w[r] = w;
            }
            if found.is_some() {
                return found;
            }
        }
        None
    }

    /// Whether no move of a sweep would change the model.
    fn is_stationary(&mut self, cfg: &FitConfig) -> bool {
        let (mut wp, mut wm) = (0.0, 0.0);
        for (w, y) in self.w.iter().zip(&self.y) {
            if *y > 0.0 {
                wp += w;
            } else {
                wm += w;
            }
        }
        let b = (self.bias + coef_step(wp, wm)).clamp(-COEF_CLAMP, COEF_CLAMP);
        if libm::fabs(b - self.bias) > STATIONARY_TOL {
            return false;
        }
        for c in 0..self.x.n_cols() {
            match self.proposed_move(c, cfg) {
                Move::Keep(v) if libm::fabs(v - self.coef[c]) <= STATIONARY_TOL => {}
                Move::Stay => {}
                _ => return false,
            }
        }
        !(cfg.swap_search && self.find_swap().is_some())
    }

    fn to_params(&self, lambda0: f64) -> ModelParams {
        let mut m = ModelParams::intercept(self.bias, lambda0);
        for &c in &self.support {
            m.set_coef(c, self.coef[c]);
        }
        m
    }
}

fn check_inputs(x: &AugmentedMatrix, labels: &[u8], cfg: &FitConfig) -> Result<()> {
    cfg.validate()?;
    if labels.is_empty() {
        return Err(Error::Dimension("no rows to fit".into()));
    }
    if labels.len() != x.n_rows() {
        return Err(Error::Dimension(format!(
            "{} labels for {} rows",
            labels.len(),
            x.n_rows()
        )));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::InvalidDataset("labels must be 0 or 1".into()));
    }
    Ok(())
}

/// Fits from an optional warm start and reports the objective trajectory.
pub fn fit_traced(x: &AugmentedMatrix, labels: &[u8], cfg: &FitConfig, init: Option<&ModelParams>) -> Result<FitTrace> {
    check_inputs(x, labels, cfg)?;
    if let Some(m) = init {
        m.check_dims(x)?;
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 || n_pos == labels.len() {
        let bias = if n_pos == 0 { -COEF_CLAMP } else { COEF_CLAMP };
        let params = ModelParams::intercept(bias, cfg.lambda0);
        let obj = crate::model::objective(&params, x, labels, cfg.lambda0)?;
        return Ok(FitTrace {
            params,
            status: FitStatus::SingleClass,
            objectives: vec![obj],
        });
    }

    let mut st = State::new(x, labels, init);
    if let Some(m) = init {
        // Drop the highest-index extras of an oversized warm start.
        while st.support.len() > cfg.max_support_size {
            let c = *st.support.last().expect("nonempty");
            st.set_coef(c, 0.0);
        }
        if st.support.len() == m.sparsity() && st.is_stationary(cfg) {
            let mut params = m.clone();
            params.lambda0 = cfg.lambda0;
            return Ok(FitTrace {
                params,
                status: FitStatus::WarmStartOptimal,
                objectives: vec![st.objective(cfg.lambda0)],
            });
        }
    }
    st.bias_step();
    let mut objectives = vec![st.objective(cfg.lambda0)];
    let mut status = FitStatus::MaxSweeps;
    for _ in 0..cfg.max_sweeps {
        st.refresh();
        let before = st.objective(cfg.lambda0);
        let support_before = st.support.clone();
        for c in 0..x.n_cols() {
            match st.proposed_move(c, cfg) {
                Move::Keep(v) | Move::Enter(v) => st.set_coef(c, v),
                Move::Drop => st.set_coef(c, 0.0),
                Move::Stay => {}
            }
        }
        st.polish();
        let mut swapped = false;
        if cfg.swap_search {
            if let Some((s, j, v)) = st.find_swap() {
                st.set_coef(s, 0.0);
                st.set_coef(j, v);
                st.polish();
                swapped = true;
            }
        }
        let after = st.objective(cfg.lambda0);
        objectives.push(after);
        let settled = !swapped && st.support == support_before;
        if settled && before - after < cfg.tol * libm::fabs(before).max(f64::MIN_POSITIVE) {
            status = FitStatus::Converged;
            break;
        }
    }
    Ok(FitTrace {
        params: st.to_params(cfg.lambda0),
        status,
        objectives,
    })
}

pub fn fit(x: &AugmentedMatrix, labels: &[u8], cfg: &FitConfig) -> Result<ModelParams> {
    Ok(fit_traced(x, labels, cfg, None)?.params)
}

pub fn fit_warm(x: &AugmentedMatrix, labels: &[u8], cfg: &FitConfig, init: &ModelParams) -> Result<ModelParams> {
    Ok(fit_traced(x, labels, cfg, Some(init))?.params)
}

/// Fits a descending `lambda0` grid, warm-starting each fit from the last.
pub fn fit_path(x: &AugmentedMatrix, labels: &[u8], lambdas: &[f64], cfg: &FitConfig) -> Result<Vec<ModelParams>> {
    if lambdas.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    if lambdas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Config("lambda grid must be sorted descending".into()));
    }
    let mut out: Vec<ModelParams> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let step_cfg = cfg.with_lambda(lambda);
        let m = fit_traced(x, labels, &step_cfg, out.last())?.params;
        out.push(m);
    }
    Ok(out)
}

/// The grid searched by default: 20 down to 0.005.
pub const DEFAULT_LAMBDA_GRID: [f64; 13] = [20.0, 10.0, 5.0, 2.0, 1.0, 0.5, 0.4, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::objective;

    fn matrix(rows: &[&[u8]]) -> AugmentedMatrix {
        let dense: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect();
        AugmentedMatrix::from_dense(&dense).unwrap()
    }

    /// Brute-force 1-D minimizer of `W+ e^-t + W- e^t` by golden section.
    fn golden_min(wp: f64, wm: f64) -> f64 {
        let f = |t: f64| wp * (-t).exp() + wm * t.exp();
        let (mut a, mut b) = (-10.0f64, 10.0f64);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        (a + b) / 2.0
    }

    #[test]
    fn optimal_coef_examples() {
        let col = [true, true, true, false];
        assert_eq!(optimal_coef(&col, &[1.0, 1.0, 2.0, 5.0], &[1, 1, 0, 0]), 0.0);
        let v = optimal_coef(&col, &[2.0, 1.0, 1.0, 5.0], &[1, 1, 0, 1]);
        assert!((v - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((v - golden_min(3.0, 1.0)).abs() < 1e-7);
        assert!((v - 0.5493).abs() < 1e-4);
        assert_eq!(optimal_coef(&[false; 4], &[1.0; 4], &[1, 0, 1, 0]), 0.0);
        assert_eq!(optimal_coef(&col, &[1.0; 4], &[1, 1, 1, 0]), COEF_CLAMP);
        assert_eq!(optimal_coef(&col, &[1.0; 4], &[0, 0, 0, 1]), -COEF_CLAMP);
    }

    #[test]
    fn huge_lambda_gives_intercept_only() {
        let x = matrix(&[&[1, 0], &[0, 1], &[1, 1], &[0, 0]]);
        let cfg = FitConfig::default().with_lambda(1e6);
        let m = fit(&x, &[1, 1, 1, 0], &cfg).unwrap();
        assert_eq!(m.sparsity(), 0);
        assert!((m.bias - 0.5 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_column_enters() {
        let labels = [1, 1, 1, 1, 0, 0, 0, 0];
        let rows: Vec<Vec<u8>> = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| vec![y, (i % 2) as u8])
            .collect();
        let refs: Vec<&[u8]> = rows.iter().map(Vec::as_slice).collect();
        let x = matrix(&refs);
        let cfg = FitConfig::default().with_lambda(0.01);
        let m = fit(&x, &labels, &cfg).unwrap();
        assert_eq!(m.support(), [0]);
        assert!(objective(&m, &x, &labels, 0.01).unwrap() < 1.0);
    }

    #[test]
    fn identical_rows_give_empty_support() {
        let x = matrix(&[&[1, 0, 1], &[1, 0, 1], &[1, 0, 1], &[1, 0, 1]]);
        for lambda in [1e-6, 0.01, 1.0] {
            let m = fit(&x, &[1, 0, 1, 0], &FitConfig::default().with_lambda(lambda)).unwrap();
            assert_eq!(m.sparsity(), 0, "lambda {lambda}");
        }
    }

    #[test]
    fn single_class_is_intercept_only() {
        let x = matrix(&[&[1], &[0]]);
        let t = fit_traced(&x, &[1, 1], &FitConfig::default(), None).unwrap();
        assert_eq!(t.status, FitStatus::SingleClass);
        assert_eq!(t.params.bias, COEF_CLAMP);
        assert_eq!(t.params.sparsity(), 0);
    }

    #[test]
    fn path_errors_and_single_point() {
        let x = matrix(&[&[1], &[0], &[1], &[0]]);
        let y = [1, 0, 1, 1];
        assert!(fit_path(&x, &y, &[], &FitConfig::default()).is_err());
        assert!(fit_path(&x, &y, &[0.1, 1.0], &FitConfig::default()).is_err());
        let p = fit_path(&x, &y, &[1e6], &FitConfig::default()).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].sparsity(), 0);
    }

    #[test]
    fn config_validation() {
        let x = matrix(&[&[1], &[0]]);
        let bad = FitConfig {
            tol: 0.0,
            ..FitConfig::default()
        };
        assert!(fit(&x, &[1, 0], &bad).is_err());
        let bad = FitConfig {
            max_sweeps: 0,
            ..FitConfig::default()
        };
        assert!(fit(&x, &[1, 0], &bad).is_err());
        assert!(fit(&x, &[1, 0], &FitConfig::default().with_lambda(-1.0)).is_err());
        assert!(fit(&x, &[1], &FitConfig::default()).is_err());
    }
}
