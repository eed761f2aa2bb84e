//! Per-feature step functions of a fitted model, with the offsets and
//! adjustment curves that apply when features are missing.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::augment::ColumnKind;
use crate::dataset::{Cell, Dataset};
use crate::error::Result;
use crate::model::{exact_sum, Mgam};

/// `(threshold index, threshold, coefficient)`
type RawStep = (usize, f64, f64);
type AdjustGroups = Vec<((usize, MissingKey), Vec<RawStep>)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MissingKey {
    Reason(u16),
    /// Any reason.
    Overall,
}

impl MissingKey {
    fn matches(&self, cell: Cell) -> bool {
        match *self {
            MissingKey::Reason(m) => cell.reason() == m,
            MissingKey::Overall => cell.is_absent(),
        }
    }
}

/// One threshold of a step curve. The curve equals `value` on
/// `(previous threshold, threshold]` and 0 above the last threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub k: usize,
    pub threshold: f64,
    /// Coefficient of `1[x <= threshold]`.
    pub delta: f64,
    /// Sum of this and all later deltas.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adjustment {
    pub missing_feature: usize,
    pub key: MissingKey,
    pub label: String,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFunction {
    pub feature: usize,
    pub name: String,
    /// Applies while the feature is present.
    pub steps: Vec<Step>,
    /// Replaces the curve while the feature is absent.
    pub missing_offsets: Vec<(MissingKey, f64)>,
    pub adjustments: Vec<Adjustment>,
}

fn steps_from(mut raw: Vec<RawStep>) -> Vec<Step> {
    raw.sort_by_key(|r| r.0);
    (0..raw.len())
        .map(|i| Step {
            k: raw[i].0,
            threshold: raw[i].1,
            delta: raw[i].2,
            value: exact_sum(raw[i..].iter().map(|r| r.2)),
        })
        .collect()
}

fn active<'a>(steps: &'a [Step], cell: Cell) -> impl Iterator<Item = f64> + 'a {
    let x = cell.value();
    steps
        .iter()
        .filter(move |s| x.is_some_and(|v| v <= s.threshold))
        .map(|s| s.delta)
}

impl ShapeFunction {
    /// Individual coefficients this shape contributes to row `i`.
    pub fn contributions(&self, ds: &Dataset, i: usize) -> Vec<f64> {
        let row = ds.row(i);
        let own = row[self.feature];
        let mut out: Vec<f64> = active(&self.steps, own).collect();
        out.extend(
            self.missing_offsets
                .iter()
                .filter(|(key, _)| key.matches(own))
                .map(|(_, v)| *v),
        );
        for adj in &self.adjustments {
            if adj.key.matches(row[adj.missing_feature]) {
                out.extend(active(&adj.steps, own));
            }
        }
        out
    }

    /// Value of the shape on row `i`.
    pub fn eval(&self, ds: &Dataset, i: usize) -> f64 {
        exact_sum(self.contributions(ds, i))
    }
}

fn adjustment_label(names: &[String], missing: usize, key: MissingKey) -> String {
    match key {
        MissingKey::Reason(m) => format!("when {} missing (reason {m})", names[missing]),
        MissingKey::Overall => format!("when {} missing (any reason)", names[missing]),
    }
}

/// Groups the model's terms by the feature whose curve they shape. A
/// reason equal to the model's overall code becomes `MissingKey::Overall`.
pub fn export_shapes(m: &Mgam) -> Result<Vec<ShapeFunction>> {
    m.validate()?;
    let key = |reason: u16| match m.overall_code() {
        Some(o) if o == reason => MissingKey::Overall,
        _ => MissingKey::Reason(reason),
    };
    let d = m.bins.d();
    let mut base: Vec<Vec<RawStep>> = (0..d).map(|_| Vec::new()).collect();
    let mut offsets: Vec<Vec<(MissingKey, f64)>> = (0..d).map(|_| Vec::new()).collect();
    let mut adjust: Vec<AdjustGroups> = (0..d).map(|_| Vec::new()).collect();
    for &(kind, v) in &m.terms {
        let t = |j: usize, k: usize| m.bins.thresholds(j)[k];
        match kind {
            ColumnKind::Threshold { feature, k } => base[feature].push((k, t(feature, k), v)),
            ColumnKind::MissInd { feature, reason } => offsets[feature].push((key(reason), v)),
            ColumnKind::MissIndOverall { feature } => offsets[feature].push((MissingKey::Overall, v)),
            ColumnKind::Interaction {
                missing,
                feature,
                k,
                reason,
            } => push_adjust(&mut adjust[feature], (missing, key(reason)), (k, t(feature, k), v)),
            ColumnKind::InteractionOverall { missing, feature, k } => push_adjust(
                &mut adjust[feature],
                (missing, MissingKey::Overall),
                (k, t(feature, k), v),
            ),
        }
    }
    let mut out = Vec::with_capacity(d);
    for (j, ((b, mut o), mut a)) in base.into_iter().zip(offsets).zip(adjust).enumerate() {
        o.sort_by_key(|e| e.0);
        a.sort_by_key(|e| e.0);
        out.push(ShapeFunction {
            feature: j,
            name: m.feature_names[j].clone(),
            steps: steps_from(b),
            missing_offsets: o,
            adjustments: a
                .into_iter()
                .map(|((missing, key), raw)| Adjustment {
                    missing_feature: missing,
                    key,
                    label: adjustment_label(&m.feature_names, missing, key),
                    steps: steps_from(raw),
                })
                .collect(),
        });
    }
    Ok(out)
}

fn push_adjust(list: &mut AdjustGroups, key: (usize, MissingKey), step: RawStep) {
    match list.iter_mut().find(|(k, _)| *k == key) {
        Some((_, steps)) => steps.push(step),
        None => list.push((key, alloc::vec![step])),
    }
}

/// `bias + sum of all shape contributions`, summed exactly.
pub fn reconstruct_score(bias: f64, shapes: &[ShapeFunction], ds: &Dataset, i: usize) -> f64 {
    exact_sum(core::iter::once(bias).chain(shapes.iter().flat_map(|s| s.contributions(ds, i))))
}
