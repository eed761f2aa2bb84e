//! Outcome-dependent (MAR) missingness injection and seeded synthetic
//! data generators.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::augment::quantile_lower;
use crate::dataset::{Cell, Dataset};
use crate::error::{Error, Result};

pub const DEFAULT_QUANTILE_LEVEL: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct MarSpec {
    /// Column that receives missingness.
    pub target: usize,
    /// Column whose quantile splits the rows.
    pub conditioning: usize,
    pub rate: f64,
    pub quantile_level: f64,
    pub seed: u64,
}

impl MarSpec {
    pub fn new(target: usize, conditioning: usize, rate: f64, seed: u64) -> MarSpec {
        MarSpec {
            target,
            conditioning,
            rate,
            quantile_level: DEFAULT_QUANTILE_LEVEL,
            seed,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.target >= d || self.conditioning >= d {
            return Err(Error::Config(format!(
                "MAR columns {} / {} out of range for {d} features",
                self.target, self.conditioning
            )));
        }
        if self.target == self.conditioning {
            return Err(Error::Config("MAR target and conditioning columns coincide".into()));
        }
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::Config(format!("MAR rate {} outside [0, 1]", self.rate)));
        }
        if !(0.0..=1.0).contains(&self.quantile_level) {
            return Err(Error::Config(format!(
                "quantile level {} outside [0, 1]",
                self.quantile_level
            )));
        }
        Ok(())
    }
}

/// Probability that the target is made absent given the label and the
/// conditioning value (`None` counts as below the cut).
pub fn mar_probability(label: u8, conditioning: Option<f64>, cut: f64, rate: f64) -> f64 {
    let high = matches!(conditioning, Some(v) if v >= cut);
    if high == (label == 1) {
        rate
    } else {
        0.0
    }
}

/// Cut value `Q(q)` of the conditioning column.
pub fn mar_cut(ds: &Dataset, spec: &MarSpec) -> Result<f64> {
    let mut present = ds.present_values(spec.conditioning);
    present.sort_by(f64::total_cmp);
    quantile_lower(&present, spec.quantile_level).ok_or_else(|| {
        Error::InvalidDataset(format!(
            "conditioning column {} has no present values",
            spec.conditioning
        ))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarOutcome {
    pub dataset: Dataset,
    pub cut: f64,
    /// Reason code of the injected cells, if any were injected.
    pub reason: Option<u16>,
    /// Rows with a nonzero injection probability.
    pub eligible: usize,
    pub injected: usize,
}

/// Makes the target column absent on a seeded subset of rows. One uniform
/// is drawn per row, in row order, whether or not the row is eligible.
/// Injected cells get the next unused specific reason code; an existing
/// overall code moves up by one.
pub fn inject_mar(ds: &Dataset, spec: &MarSpec) -> Result<MarOutcome> {
    spec.validate(ds.d())?;
    let cut = mar_cut(ds, spec)?;
    let specific = ds.n_reasons() - u16::from(ds.has_overall_reason());
    let code = specific
        .checked_add(1)
        .filter(|c| *c < u16::MAX)
        .ok_or_else(|| Error::InvalidDataset("reason codes exhausted".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cells = ds.cells().to_vec();
    let d = ds.d();
    let (mut eligible, mut injected) = (0, 0);
    for i in 0..ds.n() {
        let u: f64 = rng.random();
        let p = mar_probability(ds.labels()[i], ds.value(i, spec.conditioning), cut, spec.rate);
        if p > 0.0 {
            eligible += 1;
        }
        let cell = &mut cells[i * d + spec.target];
        if u < p && !cell.is_absent() {
            *cell = Cell::absent(code);
            injected += 1;
        }
    }
    if injected == 0 {
        return Ok(MarOutcome {
            dataset: ds.clone(),
            cut,
            reason: None,
            eligible,
            injected,
        });
    }
    let overall = ds.has_overall_reason();
    let dataset = Dataset::new(
        ds.feature_names().to_vec(),
        cells,
        ds.labels().to_vec(),
        code + u16::from(overall),
        overall,
    )?;
    Ok(MarOutcome {
        dataset,
        cut,
        reason: Some(code),
        eligible,
        injected,
    })
}

/// Named generator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// True score identically zero.
    Null,
    /// Three step-shaped active features, labels through a logistic link.
    SparseAdditive,
    /// Same score, labels are `score > 0`.
    SparseAdditiveNoiseless,
}

impl Generator {
    pub const ALL: [Generator; 3] = [
        Generator::Null,
        Generator::SparseAdditive,
        Generator::SparseAdditiveNoiseless,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Generator::Null => "null",
            Generator::SparseAdditive => "sparse-additive",
            Generator::SparseAdditiveNoiseless => "sparse-additive-noiseless",
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Generator> {
        Generator::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::UnknownGenerator(s.to_string()))
    }
}

/// `f(x) = sum_k weights[k] * 1[x <= thresholds[k]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepShape {
    pub feature: usize,
    pub thresholds: Vec<f64>,
    pub weights: Vec<f64>,
}

impl StepShape {
    pub fn eval(&self, x: f64) -> f64 {
        self.thresholds
            .iter()
            .zip(&self.weights)
            .filter(|(t, _)| x <= **t)
            .map(|(_, w)| w)
            .sum()
    }
}

/// Everything needed to recompute the true score of a generated row.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMeta {
    pub generator: Generator,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub bias: f64,
    /// Multiplier inside the logistic link.
    pub signal: f64,
    pub shapes: Vec<StepShape>,
}

impl GeneratorMeta {
    pub fn true_score(&self, row: &[f64]) -> f64 {
        self.bias + self.shapes.iter().map(|s| s.eval(row[s.feature])).sum::<f64>()
    }

    pub fn active_features(&self) -> Vec<usize> {
        self.shapes.iter().map(|s| s.feature).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub meta: GeneratorMeta,
}

fn sparse_shapes() -> Vec<StepShape> {
    let shape = |feature, thresholds: &[f64], weights: &[f64]| StepShape {
        feature,
        thresholds: thresholds.to_vec(),
        weights: weights.to_vec(),
    };
    alloc::vec![
        shape(0, &[0.0], &[-2.0]),
        shape(1, &[-0.5, 0.5], &[1.5, -1.0]),
        shape(2, &[0.3], &[1.2]),
    ]
}

/// Fully observed dataset with `d` independent standard normal features
/// named `x0..`. Features 0, 1 and 2 (those that exist) carry the signal.
pub fn gen_synthetic(n: usize, d: usize, seed: u64, generator: Generator) -> Result<Synthetic> {
    if n == 0 || d < 2 {
        return Err(Error::Config(format!(
            "generator needs n >= 1 and d >= 2, got n={n}, d={d}"
        )));
    }
    let (bias, shapes) = match generator {
        Generator::Null => (0.0, Vec::new()),
        _ => (0.5, sparse_shapes().into_iter().filter(|s| s.feature < d).collect()),
    };
    let meta = GeneratorMeta {
        generator,
        n,
        d,
        seed,
        bias,
        signal: 2.0,
        shapes,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut row = alloc::vec![0.0; d];
    for _ in 0..n {
        for v in row.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let score = meta.true_score(&row);
        let u: f64 = rng.random();
        let y = match generator {
            Generator::SparseAdditiveNoiseless => score > 0.0,
            _ => u < 1.0 / (1.0 + libm::exp(-meta.signal * score)),
        };
        cells.extend(row.iter().map(|&v| Cell::Present(v)));
        labels.push(u8::from(y));
    }
    let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    Ok(Synthetic {
        dataset: Dataset::new(names, cells, labels, 0, false)?,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small() -> Dataset {
        // x0 target, x1 conditioning over 0..10, alternating labels
        let rows: Vec<Vec<Option<f64>>> = (0..10).map(|i| vec![Some(i as f64 * 0.5), Some(i as f64)]).collect();
        let labels = (0..10).map(|i| (i % 2) as u8).collect();
        Dataset::from_options(vec!["a".into(), "b".into()], &rows, labels).unwrap()
    }

    #[test]
    fn probability_table() {
        assert_eq!(mar_probability(1, Some(5.0), 5.0, 0.3), 0.3);
        assert_eq!(mar_probability(0, Some(5.0), 5.0, 0.3), 0.0);
        assert_eq!(mar_probability(0, Some(4.9), 5.0, 0.3), 0.3);
        assert_eq!(mar_probability(1, Some(4.9), 5.0, 0.3), 0.0);
        assert_eq!(mar_probability(0, None, 5.0, 0.3), 0.3);
        assert_eq!(mar_probability(1, None, 5.0, 0.3), 0.0);
    }

    #[test]
    fn zero_rate_is_identity() {
        let ds = small();
        let out = inject_mar(&ds, &MarSpec::new(0, 1, 0.0, 3)).unwrap();
        assert_eq!(out.dataset, ds);
        assert_eq!(out.injected, 0);
        assert_eq!(out.reason, None);
    }

    #[test]
    fn full_rate_hits_exactly_the_eligible_rows() {
        let ds = small();
        let out = inject_mar(&ds, &MarSpec::new(0, 1, 1.0, 3)).unwrap();
        // Q(0.6) over 0..9 with lower interpolation is 5.
        assert_eq!(out.cut, 5.0);
        for i in 0..10 {
            let eligible = (i >= 5) == (i % 2 == 1);
            assert_eq!(out.dataset.cell(i, 0).is_absent(), eligible, "row {i}");
            assert!(!out.dataset.cell(i, 1).is_absent());
        }
        assert_eq!(out.reason, Some(1));
        assert_eq!(out.dataset.n_reasons(), 1);
        assert_eq!(out.injected, out.eligible);
    }

    #[test]
    fn fresh_code_and_untouched_absent_cells() {
        let rows = vec![
            vec![None, Some(9.0)],
            vec![Some(1.0), Some(9.0)],
            vec![Some(1.0), Some(0.0)],
        ];
        let ds = Dataset::from_options(vec!["a".into(), "b".into()], &rows, vec![1, 1, 0]).unwrap();
        let out = inject_mar(&ds, &MarSpec::new(0, 1, 1.0, 0)).unwrap().dataset;
        assert_eq!(out.reason(0, 0), 1);
        assert_eq!(out.reason(1, 0), 2);
        assert_eq!(out.reason(2, 0), 2);
        assert_eq!(out.n_reasons(), 2);
    }

    #[test]
    fn overall_code_shifts_up() {
        let cells = vec![
            Cell::absent(1),
            Cell::Present(3.0),
            Cell::Present(0.0),
            Cell::Present(3.0),
        ];
        let ds = Dataset::new(vec!["a".into(), "b".into()], cells, vec![1, 1], 2, true).unwrap();
        let out = inject_mar(&ds, &MarSpec::new(0, 1, 1.0, 0)).unwrap();
        assert_eq!(out.reason, Some(2));
        assert_eq!(out.dataset.n_reasons(), 3);
        assert!(out.dataset.has_overall_reason());
        assert!(out.dataset.matches_reason(1, 0, 3));
    }

    #[test]
    fn spec_errors() {
        let ds = small();
        assert!(inject_mar(&ds, &MarSpec::new(0, 0, 0.5, 0)).is_err());
        assert!(inject_mar(&ds, &MarSpec::new(0, 2, 0.5, 0)).is_err());
        assert!(inject_mar(&ds, &MarSpec::new(0, 1, 1.5, 0)).is_err());
        let rows = vec![vec![Some(1.0), None], vec![Some(2.0), None]];
        let empty = Dataset::from_options(vec!["a".into(), "b".into()], &rows, vec![0, 1]).unwrap();
        assert!(inject_mar(&empty, &MarSpec::new(0, 1, 0.5, 0)).is_err());
    }

    #[test]
    fn generator_names_round_trip() {
        for g in Generator::ALL {
            assert_eq!(g.name().parse::<Generator>().unwrap(), g);
        }
        assert!(matches!("nope".parse::<Generator>(), Err(Error::UnknownGenerator(_))));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_synthetic(200, 5, 11, Generator::SparseAdditive).unwrap();
        let b = gen_synthetic(200, 5, 11, Generator::SparseAdditive).unwrap();
        assert_eq!(a, b);
        assert_ne!(
            a.dataset,
            gen_synthetic(200, 5, 12, Generator::SparseAdditive).unwrap().dataset
        );
        assert!(gen_synthetic(0, 5, 0, Generator::Null).is_err());
        assert!(gen_synthetic(5, 1, 0, Generator::Null).is_err());
        assert_eq!(
            gen_synthetic(5, 2, 0, Generator::SparseAdditive)
                .unwrap()
                .meta
                .shapes
                .len(),
            2
        );
    }

    #[test]
    fn null_generator_is_balanced() {
        let n = 4000;
        let s = gen_synthetic(n, 3, 5, Generator::Null).unwrap();
        let ones = s.dataset.labels().iter().filter(|&&y| y == 1).count() as f64;
        let sd = libm::sqrt(n as f64 * 0.25);
        assert!((ones - n as f64 / 2.0).abs() < 3.0 * sd);
    }

    #[test]
    fn noiseless_labels_follow_the_score() {
        let s = gen_synthetic(300, 4, 2, Generator::SparseAdditiveNoiseless).unwrap();
        for i in 0..300 {
            let row: Vec<f64> = (0..4).map(|j| s.dataset.value(i, j).unwrap()).collect();
            assert_eq!(s.dataset.labels()[i], u8::from(s.meta.true_score(&row) > 0.0));
        }
    }
}
