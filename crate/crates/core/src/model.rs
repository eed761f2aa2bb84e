//! Fitted parameters, scoring, and the exponential-loss objective.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::augment::{AugmentedMatrix, BinningSpec, ColumnKind};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Largest magnitude of a single coefficient or of the bias.
pub const COEF_CLAMP: f64 = 15.0;
/// Exponents are clamped to this magnitude before `exp`.
pub const EXP_CLAMP: f64 = 700.0;

/// Correctly rounded sum of `values`, independent of their order.
///
/// Shewchuk's partials; used wherever the same score is assembled along
/// different paths and must come out bit-identical.
pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if libm::fabs(x) < libm::fabs(y) {
                core::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    let Some(mut hi) = partials.pop() else {
        return 0.0;
    };
    let mut lo = 0.0;
    while let Some(y) = partials.pop() {
        let x = hi;
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    // Half-way case: round-half-even on the partials can go the wrong way.
    if let Some(&next) = partials.last() {
        if (lo < 0.0 && next < 0.0) || (lo > 0.0 && next > 0.0) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
    }
    hi
}

/// Score > 0 or exactly 0 predicts the positive class.
pub fn predict_label(score: f64) -> u8 {
    u8::from(score >= 0.0)
}

pub fn signed_label(y: u8) -> f64 {
    if y == 1 {
        1.0
    } else {
        -1.0
    }
}

pub(crate) fn exp_loss(signed_margin: f64) -> f64 {
    libm::exp((-signed_margin).clamp(-EXP_CLAMP, EXP_CLAMP))
}

/// Bias plus sparse coefficients over the columns of one augmented matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub bias: f64,
    pub lambda0: f64,
    coef: BTreeMap<usize, f64>,
}

impl ModelParams {
    pub fn intercept(bias: f64, lambda0: f64) -> ModelParams {
        ModelParams {
            bias,
            lambda0,
            coef: BTreeMap::new(),
        }
    }

    /// Sets a coefficient; an exact zero removes it from the support.
    pub fn set_coef(&mut self, column: usize, value: f64) {
        if value == 0.0 {
            self.coef.remove(&column);
        } else {
            self.coef.insert(column, value);
        }
    }

    pub fn coef(&self, column: usize) -> f64 {
        self.coef.get(&column).copied().unwrap_or(0.0)
    }

    pub fn coefficients(&self) -> &BTreeMap<usize, f64> {
        &self.coef
    }

    pub fn support(&self) -> Vec<usize> {
        self.coef.keys().copied().collect()
    }

    /// Nonzero coefficients; the bias is not counted.
    pub fn sparsity(&self) -> usize {
        self.coef.len()
    }

    /// `gamma . row + gamma_0` for one boolean row.
    pub fn predict_score(&self, row: &[bool]) -> f64 {
        exact_sum(
            core::iter::once(self.bias).chain(
                self.coef
                    .iter()
                    .filter(|(&c, _)| row.get(c).copied().unwrap_or(false))
                    .map(|(_, &v)| v),
            ),
        )
    }

    /// Scores of every row of `x`.
    pub fn scores(&self, x: &AugmentedMatrix) -> Vec<f64> {
        let mut terms: Vec<Vec<f64>> = vec![vec![self.bias]; x.n_rows()];
        for (&c, &v) in &self.coef {
            for &r in x.active_rows(c) {
                terms[r as usize].push(v);
            }
        }
        terms.into_iter().map(exact_sum).collect()
    }

    pub fn check_dims(&self, x: &AugmentedMatrix) -> Result<()> {
        match self.coef.keys().next_back() {
            Some(&c) if c >= x.n_cols() => Err(Error::Dimension(alloc::format!(
                "coefficient on column {c} but matrix has {} columns",
                x.n_cols()
            ))),
            _ => Ok(()),
        }
    }
}

/// `(1/n) sum exp(-y~ (gamma . x + gamma_0)) + lambda0 ||gamma||_0` with
/// `y~ = 2y - 1`.
pub fn objective(m: &ModelParams, x: &AugmentedMatrix, labels: &[u8], lambda0: f64) -> Result<f64> {
    if labels.len() != x.n_rows() {
        return Err(Error::Dimension("labels and rows differ in length".into()));
    }
    m.check_dims(x)?;
    Ok(loss(m, x, labels) + lambda0 * m.sparsity() as f64)
}

pub(crate) fn loss(m: &ModelParams, x: &AugmentedMatrix, labels: &[u8]) -> f64 {
    let n = labels.len().max(1) as f64;
    m.scores(x)
        .iter()
        .zip(labels)
        .map(|(s, &y)| exp_loss(signed_label(y) * s))
        .sum::<f64>()
        / n
}

/// A fitted model expressed in terms of column identities rather than
/// matrix positions, so it can score raw rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Mgam {
    pub bias: f64,
    pub lambda0: f64,
    /// Nonzero terms in emission order.
    pub terms: Vec<(ColumnKind, f64)>,
    pub bins: BinningSpec,
    pub feature_names: Vec<String>,
    pub n_reasons: u16,
    pub overall_reason: bool,
}

/// Coefficients grouped the way the model is read: threshold steps,
/// missingness offsets, and interaction adjustments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Decoded {
    /// `((j, k), beta_jk)`
    pub beta: Vec<((usize, usize), f64)>,
    /// `((j, m), beta^miss_jm)`
    pub beta_miss: Vec<((usize, u16), f64)>,
    pub beta_miss_overall: Vec<(usize, f64)>,
    /// `((j, j', k, m), alpha)`
    pub alpha: Vec<((usize, usize, usize, u16), f64)>,
    pub alpha_overall: Vec<((usize, usize, usize), f64)>,
}

impl Mgam {
    pub fn from_params(params: &ModelParams, x: &AugmentedMatrix, bins: &BinningSpec, train: &Dataset) -> Result<Mgam> {
        params.check_dims(x)?;
        let mut terms: Vec<(ColumnKind, f64)> = params.coef.iter().map(|(&c, &v)| (x.kind(c), v)).collect();
        terms.sort_by_key(|t| t.0);
        let m = Mgam {
            bias: params.bias,
            lambda0: params.lambda0,
            terms,
            bins: bins.clone(),
            feature_names: train.feature_names().to_vec(),
            n_reasons: train.n_reasons(),
            overall_reason: train.has_overall_reason(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins.d() != self.feature_names.len() {
            return Err(Error::Orphan(alloc::format!(
                "binning covers {} features, model names {}",
                self.bins.d(),
                self.feature_names.len()
            )));
        }
        for (kind, v) in &self.terms {
            kind.check(&self.bins, self.n_reasons)?;
            if !v.is_finite() {
                return Err(Error::Orphan(alloc::format!("non-finite coefficient on {kind}")));
            }
        }
        Ok(())
    }

    pub fn sparsity(&self) -> usize {
        self.terms.len()
    }

    /// Code that stands for "any reason" in this model, if any.
    pub fn overall_code(&self) -> Option<u16> {
        self.overall_reason.then_some(self.n_reasons)
    }

    /// Score of row `i` of `ds`, evaluated from the raw cells with the
    /// model's own reason layout.
    pub fn score_row(&self, ds: &Dataset, i: usize) -> f64 {
        let row = ds.row(i);
        let overall = self.overall_code();
        exact_sum(
            core::iter::once(self.bias).chain(
                self.terms
                    .iter()
                    .filter(|(k, _)| k.eval_row(row, &self.bins, overall))
                    .map(|(_, v)| *v),
            ),
        )
    }

    pub fn scores(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if ds.d() != self.bins.d() {
            return Err(Error::Dimension(alloc::format!(
                "model has {} features, data {}",
                self.bins.d(),
                ds.d()
            )));
        }
        Ok((0..ds.n()).map(|i| self.score_row(ds, i)).collect())
    }

    pub fn decode(&self) -> Decoded {
        let mut out = Decoded::default();
        for &(kind, v) in &self.terms {
            match kind {
                ColumnKind::Threshold { feature, k } => out.beta.push(((feature, k), v)),
                ColumnKind::MissInd { feature, reason } => out.beta_miss.push(((feature, reason), v)),
                ColumnKind::MissIndOverall { feature } => out.beta_miss_overall.push((feature, v)),
                ColumnKind::Interaction {
                    missing,
                    feature,
                    k,
                    reason,
                } => out.alpha.push(((missing, feature, k, reason), v)),
                ColumnKind::InteractionOverall { missing, feature, k } => {
                    out.alpha_overall.push(((missing, feature, k), v))
                }
            }
        }
        out
    }
}
