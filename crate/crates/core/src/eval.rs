//! Metrics and cross-validated selection of `lambda0`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::{build_augmented, compute_binning, AugmentConfig, AugmentedMatrix, BinningSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{predict_label, Mgam, ModelParams};
use crate::solver::{fit_path, FitConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    Auc,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Auc => "auc",
        }
    }

    pub fn evaluate(&self, scores: &[f64], labels: &[u8]) -> Result<f64> {
        match self {
            Metric::Accuracy => accuracy(scores, labels),
            Metric::Auc => auc(scores, labels),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Metric> {
        match s {
            "accuracy" => Ok(Metric::Accuracy),
            "auc" => Ok(Metric::Auc),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

fn check_lengths(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Dimension("no scores".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Fraction of rows where `predict_label(score)` equals the label.
pub fn accuracy(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(s, y)| predict_label(**s) == **y)
        .count();
    Ok(hits as f64 / scores.len() as f64)
}

/// Mann-Whitney AUC with midranks: `P(pos > neg) + P(pos = neg) / 2`.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidDataset("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the midrank sum of positives keeps everything integral.
    let mut rank2_pos: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end+1, midrank*2 = start + end + 2
        let mid2 = (start + end + 2) as u128;
        let pos_in_group = order[start..=end].iter().filter(|&&i| labels[i] == 1).count() as u128;
        rank2_pos += mid2 * pos_in_group;
        start = end + 1;
    }
    let (np, nn) = (n_pos as u128, n_neg as u128);
    let u2 = rank2_pos - np * (np + 1);
    Ok(u2 as f64 / (2 * np * nn) as f64)
}

pub fn sparsity(m: &ModelParams) -> usize {
    m.sparsity()
}

/// Fold id (0..k) for every row; each class is shuffled and dealt
/// round-robin so every fold sees both classes.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if rows.len() < k {
            return Err(Error::Stratify(format!(
                "class {class} has {} rows for {k} folds",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        for (pos, &i) in rows.iter().enumerate() {
            fold[i] = pos % k;
        }
    }
    Ok(fold)
}

/// Binning and design matrix learned from `train`.
pub fn prepare(train: &Dataset, aug: &AugmentConfig) -> Result<(BinningSpec, AugmentedMatrix)> {
    let bins = compute_binning(train, aug.n_quantiles)?;
    let x = build_augmented(train, &bins, aug)?;
    Ok((bins, x))
}

/// Fits a `lambda0` path on `train` and returns self-contained models.
pub fn fit_models(train: &Dataset, lambdas: &[f64], aug: &AugmentConfig, fit: &FitConfig) -> Result<Vec<Mgam>> {
    let (bins, x) = prepare(train, aug)?;
    fit_path(&x, train.labels(), lambdas, fit)?
        .iter()
        .map(|p| Mgam::from_params(p, &x, &bins, train))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub lambda0: f64,
    pub mean: f64,
    /// Standard error across folds (sample sd / sqrt(k)).
    pub stderr: f64,
    /// Nonzero coefficients, bias excluded.
    pub mean_support: f64,
    pub fold_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub metric: Metric,
    pub folds: usize,
    pub seed: u64,
    pub rows: Vec<CvRow>,
    pub best_lambda: f64,
}

impl CvReport {
    pub fn best_row(&self) -> &CvRow {
        self.rows
            .iter()
            .find(|r| r.lambda0 == self.best_lambda)
            .expect("best lambda comes from the rows")
    }

    /// Aligned-column text table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>10}  {:>10}  {:>10}  {:>12}\n",
            "lambda0",
            self.metric.name(),
            "stderr",
            "mean_support"
        );
        for r in &self.rows {
            let mark = if r.lambda0 == self.best_lambda { " *" } else { "" };
            out += &format!(
                "{:>10}  {:>10.6}  {:>10.6}  {:>12.2}{mark}\n",
                r.lambda0, r.mean, r.stderr, r.mean_support
            );
        }
        out
    }
}

/// Seeded stratified k-fold CV over a descending `lambda0` grid. Each
/// fold learns its own binning from its training part only.
pub fn cross_validate(
    ds: &Dataset,
    lambdas: &[f64],
    k: usize,
    metric: Metric,
    aug: &AugmentConfig,
    fit: &FitConfig,
    seed: u64,
) -> Result<CvReport> {
    if lambdas.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    let fold_of = stratified_folds(ds.labels(), k, seed)?;
    let mut values = vec![vec![0.0; k]; lambdas.len()];
    let mut supports = vec![vec![0.0; k]; lambdas.len()];
    for f in 0..k {
        let train_rows: Vec<usize> = (0..ds.n()).filter(|&i| fold_of[i] != f).collect();
        let val_rows: Vec<usize> = (0..ds.n()).filter(|&i| fold_of[i] == f).collect();
        let train = ds.select_rows(&train_rows);
        let val = ds.select_rows(&val_rows);
        let models = fit_models(&train, lambdas, aug, fit)?;
        for (li, m) in models.iter().enumerate() {
            values[li][f] = metric.evaluate(&m.scores(&val)?, val.labels())?;
            supports[li][f] = m.sparsity() as f64;
        }
    }
    let kf = k as f64;
    let rows: Vec<CvRow> = lambdas
        .iter()
        .enumerate()
        .map(|(li, &lambda0)| {
            let v = &values[li];
            let mean = v.iter().sum::<f64>() / kf;
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (kf - 1.0);
            CvRow {
                lambda0,
                mean,
                stderr: libm::sqrt(var / kf),
                mean_support: supports[li].iter().sum::<f64>() / kf,
                fold_values: v.clone(),
            }
        })
        .collect();
    let best_lambda = select_best(&rows);
    Ok(CvReport {
        metric,
        folds: k,
        seed,
        rows,
        best_lambda,
    })
}

/// Held-out comparison of a missingness-aware pipeline against the same
/// GAM pipeline on training-mean-filled data.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationComparison {
    pub mgam_accuracy: f64,
    pub mgam_lambda: f64,
    pub mgam_support: usize,
    pub imputed_accuracy: f64,
    pub imputed_lambda: f64,
    pub imputed_support: usize,
}

/// Each side selects `lambda0` by CV on `train`, refits on all of
/// `train`, and is scored on `test`.
pub fn compare_with_mean_imputation(
    train: &Dataset,
    test: &Dataset,
    lambdas: &[f64],
    k: usize,
    aug: &AugmentConfig,
    fit: &FitConfig,
    seed: u64,
) -> Result<ImputationComparison> {
    let select_and_score = |tr: &Dataset, te: &Dataset| -> Result<(f64, f64, usize)> {
        let cv = cross_validate(tr, lambdas, k, Metric::Accuracy, aug, fit, seed)?;
        let m = fit_models(tr, &[cv.best_lambda], aug, fit)?
            .pop()
            .expect("one lambda gives one model");
        Ok((accuracy(&m.scores(te)?, te.labels())?, cv.best_lambda, m.sparsity()))
    };
    let (mgam_accuracy, mgam_lambda, mgam_support) = select_and_score(train, test)?;
    let means = train.column_means();
    let (tr, te) = (train.fill_missing(&means), test.fill_missing(&means));
    let (imputed_accuracy, imputed_lambda, imputed_support) = select_and_score(&tr, &te)?;
    Ok(ImputationComparison {
        mgam_accuracy,
        mgam_lambda,
        mgam_support,
        imputed_accuracy,
        imputed_lambda,
        imputed_support,
    })
}

/// Highest mean; ties go to the larger (sparser) `lambda0`.
fn select_best(rows: &[CvRow]) -> f64 {
    let top = rows.iter().map(|r| r.mean).fold(f64::NEG_INFINITY, f64::max);
    rows.iter()
        .filter(|r| r.mean == top)
        .map(|r| r.lambda0)
        .fold(f64::NEG_INFINITY, f64::max)
}
