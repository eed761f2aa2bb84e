//! JSON documents: encoding maps, models, binnings, CV reports, metrics,
//! MAR specs, generator metadata and shape functions.

use std::collections::BTreeMap;

use mgam_core::augment::{BinningSpec, ColumnKind};
use mgam_core::eval::{CvReport, CvRow, Metric};
use mgam_core::shapes::{Adjustment, MissingKey, ShapeFunction, Step};
use mgam_core::synth::{GeneratorMeta, MarSpec, DEFAULT_QUANTILE_LEVEL};
use mgam_core::{Dataset, EncodingMap, Error, Mgam};
use serde::{Deserialize, Serialize};

pub const LABEL_RULE: &str = "score>0->1";

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidEncoding(msg.into())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingJson {
    #[serde(default)]
    pub na_token: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub na_reason: Option<u16>,
    #[serde(default)]
    pub add_overall_reason: bool,
    #[serde(default)]
    pub columns: BTreeMap<String, BTreeMap<String, u16>>,
}

impl From<&EncodingMap> for EncodingJson {
    fn from(map: &EncodingMap) -> Self {
        EncodingJson {
            na_token: map.na_token.clone(),
            na_reason: map.na_reason,
            add_overall_reason: map.add_overall_reason,
            columns: map
                .columns
                .iter()
                .map(|(c, s)| (c.clone(), s.iter().cloned().collect()))
                .collect(),
        }
    }
}

impl EncodingJson {
    pub fn into_map(self) -> Result<EncodingMap, Error> {
        let map = EncodingMap {
            na_token: self.na_token,
            na_reason: self.na_reason,
            add_overall_reason: self.add_overall_reason,
            columns: self
                .columns
                .into_iter()
                .map(|(c, s)| (c, s.into_iter().collect()))
                .collect(),
        };
        map.validate()?;
        Ok(map)
    }
}

pub fn parse_encoding(text: &str) -> Result<EncodingMap, Error> {
    serde_json::from_str::<EncodingJson>(text)
        .map_err(|e| bad(format!("encoding JSON: {e}")))?
        .into_map()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinningJson {
    pub features: Vec<String>,
    pub thresholds: Vec<Vec<f64>>,
    /// Reason codes `c` the model was fit with, overall code included.
    pub n_reasons: u16,
    pub overall_reason: bool,
}

impl BinningJson {
    pub fn new(bins: &BinningSpec, ds: &Dataset) -> Self {
        BinningJson {
            features: ds.feature_names().to_vec(),
            thresholds: bins.all().to_vec(),
            n_reasons: ds.n_reasons(),
            overall_reason: ds.has_overall_reason(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefJson {
    pub kind: String,
    pub j: usize,
    pub jp: Option<usize>,
    pub k: Option<usize>,
    pub m: Option<u16>,
    pub threshold: Option<f64>,
    pub value: f64,
}

impl CoefJson {
    fn new(kind: ColumnKind, value: f64, bins: &BinningSpec) -> Self {
        let t = |j: usize, k: usize| bins.threshold(j, k);
        let (tag, j, jp, k, m, threshold) = match kind {
            ColumnKind::Threshold { feature, k } => ("THR", feature, None, Some(k), None, t(feature, k)),
            ColumnKind::MissInd { feature, reason } => ("MI", feature, None, None, Some(reason), None),
            ColumnKind::MissIndOverall { feature } => ("MIO", feature, None, None, None, None),
            ColumnKind::Interaction {
                missing,
                feature,
                k,
                reason,
            } => ("INT", missing, Some(feature), Some(k), Some(reason), t(feature, k)),
            ColumnKind::InteractionOverall { missing, feature, k } => {
                ("INTO", missing, Some(feature), Some(k), None, t(feature, k))
            }
        };
        CoefJson {
            kind: tag.into(),
            j,
            jp,
            k,
            m,
            threshold,
            value,
        }
    }

    fn kind(&self) -> Result<ColumnKind, Error> {
        let need = |v: Option<usize>, f: &str| v.ok_or_else(|| bad(format!("{} coefficient lacks `{f}`", self.kind)));
        let reason = || {
            self.m
                .ok_or_else(|| bad(format!("{} coefficient lacks `m`", self.kind)))
        };
        Ok(match self.kind.as_str() {
            "THR" => ColumnKind::Threshold {
                feature: self.j,
                k: need(self.k, "k")?,
            },
            "MI" => ColumnKind::MissInd {
                feature: self.j,
                reason: reason()?,
            },
            "MIO" => ColumnKind::MissIndOverall { feature: self.j },
            "INT" => ColumnKind::Interaction {
                missing: self.j,
                feature: need(self.jp, "jp")?,
                k: need(self.k, "k")?,
                reason: reason()?,
            },
            "INTO" => ColumnKind::InteractionOverall {
                missing: self.j,
                feature: need(self.jp, "jp")?,
                k: need(self.k, "k")?,
            },
            other => return Err(bad(format!("unknown coefficient kind `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    pub bias: f64,
    pub lambda0: f64,
    pub coefficients: Vec<CoefJson>,
    pub binning: BinningJson,
    pub label_rule: String,
}

impl From<&Mgam> for ModelJson {
    fn from(m: &Mgam) -> Self {
        ModelJson {
            bias: m.bias,
            lambda0: m.lambda0,
            coefficients: m.terms.iter().map(|&(k, v)| CoefJson::new(k, v, &m.bins)).collect(),
            binning: BinningJson {
                features: m.feature_names.clone(),
                thresholds: m.bins.all().to_vec(),
                n_reasons: m.n_reasons,
                overall_reason: m.overall_reason,
            },
            label_rule: LABEL_RULE.into(),
        }
    }
}

impl ModelJson {
    pub fn into_model(self) -> Result<Mgam, Error> {
        if self.label_rule != LABEL_RULE {
            return Err(bad(format!("unsupported label rule `{}`", self.label_rule)));
        }
        let bins = BinningSpec::new(self.binning.thresholds)?;
        let mut terms = Vec::with_capacity(self.coefficients.len());
        for c in &self.coefficients {
            let kind = c.kind()?;
            kind.check(&bins, self.binning.n_reasons)?;
            let expected = match kind {
                ColumnKind::Threshold { feature, k }
                | ColumnKind::Interaction { feature, k, .. }
                | ColumnKind::InteractionOverall { feature, k, .. } => bins.threshold(feature, k),
                _ => None,
            };
            if c.threshold != expected {
                return Err(Error::Orphan(format!(
                    "{kind}: threshold {:?} disagrees with binning {:?}",
                    c.threshold, expected
                )));
            }
            terms.push((kind, c.value));
        }
        if terms.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(bad("coefficients must be unique and in column order"));
        }
        let m = Mgam {
            bias: self.bias,
            lambda0: self.lambda0,
            terms,
            bins,
            feature_names: self.binning.features,
            n_reasons: self.binning.n_reasons,
            overall_reason: self.binning.overall_reason,
        };
        m.validate()?;
        Ok(m)
    }
}

pub fn model_to_json(m: &Mgam) -> String {
    to_json(&ModelJson::from(m))
}

pub fn parse_model(text: &str) -> Result<Mgam, Error> {
    serde_json::from_str::<ModelJson>(text)
        .map_err(|e| bad(format!("model JSON: {e}")))?
        .into_model()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsJson {
    pub rows: usize,
    pub accuracy: f64,
    pub auc: Option<f64>,
    pub nonzero_coefficients: usize,
    pub note: String,
}

pub const SPARSITY_NOTE: &str = "nonzero_coefficients excludes the bias";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRowJson {
    pub lambda0: f64,
    pub mean: f64,
    pub stderr: f64,
    pub mean_support: f64,
    pub fold_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReportJson {
    pub metric: String,
    pub folds: usize,
    pub seed: u64,
    pub best_lambda: f64,
    pub note: String,
    pub rows: Vec<CvRowJson>,
}

impl From<&CvReport> for CvReportJson {
    fn from(r: &CvReport) -> Self {
        CvReportJson {
            metric: r.metric.name().into(),
            folds: r.folds,
            seed: r.seed,
            best_lambda: r.best_lambda,
            note: "mean_support excludes the bias".into(),
            rows: r
                .rows
                .iter()
                .map(|row| CvRowJson {
                    lambda0: row.lambda0,
                    mean: row.mean,
                    stderr: row.stderr,
                    mean_support: row.mean_support,
                    fold_values: row.fold_values.clone(),
                })
                .collect(),
        }
    }
}

impl CvReportJson {
    pub fn into_report(self) -> Result<CvReport, Error> {
        Ok(CvReport {
            metric: self.metric.parse::<Metric>()?,
            folds: self.folds,
            seed: self.seed,
            best_lambda: self.best_lambda,
            rows: self
                .rows
                .into_iter()
                .map(|r| CvRow {
                    lambda0: r.lambda0,
                    mean: r.mean,
                    stderr: r.stderr,
                    mean_support: r.mean_support,
                    fold_values: r.fold_values,
                })
                .collect(),
        })
    }
}

/// Column given by 0-based index or by header name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl ColumnRef {
    pub fn resolve(&self, ds: &Dataset) -> Result<usize, Error> {
        match self {
            ColumnRef::Index(j) if *j < ds.d() => Ok(*j),
            ColumnRef::Index(j) => Err(Error::Config(format!("feature index {j} out of range"))),
            ColumnRef::Name(n) => ds
                .feature_index(n)
                .ok_or_else(|| Error::Config(format!("no feature named `{n}`"))),
        }
    }
}

fn default_quantile() -> f64 {
    DEFAULT_QUANTILE_LEVEL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarSpecJson {
    pub target: ColumnRef,
    pub conditioning: ColumnRef,
    pub rate: f64,
    #[serde(default = "default_quantile")]
    pub quantile_level: f64,
    #[serde(default)]
    pub seed: u64,
}

impl MarSpecJson {
    pub fn resolve(&self, ds: &Dataset) -> Result<MarSpec, Error> {
        Ok(MarSpec {
            target: self.target.resolve(ds)?,
            conditioning: self.conditioning.resolve(ds)?,
            rate: self.rate,
            quantile_level: self.quantile_level,
            seed: self.seed,
        })
    }
}

pub fn parse_mar_spec(text: &str) -> Result<MarSpecJson, Error> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("MAR spec JSON: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepShapeJson {
    pub feature: usize,
    pub thresholds: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMetaJson {
    pub generator: String,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub bias: f64,
    pub signal: f64,
    pub link: String,
    pub shapes: Vec<StepShapeJson>,
}

impl From<&GeneratorMeta> for GeneratorMetaJson {
    fn from(m: &GeneratorMeta) -> Self {
        GeneratorMetaJson {
            generator: m.generator.name().into(),
            n: m.n,
            d: m.d,
            seed: m.seed,
            bias: m.bias,
            signal: m.signal,
            link: match m.generator {
                mgam_core::synth::Generator::SparseAdditiveNoiseless => "y = 1[score > 0]".into(),
                _ => "P(y = 1) = 1 / (1 + exp(-signal * score))".into(),
            },
            shapes: m
                .shapes
                .iter()
                .map(|s| StepShapeJson {
                    feature: s.feature,
                    thresholds: s.thresholds.clone(),
                    weights: s.weights.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepJson {
    pub k: usize,
    pub threshold: f64,
    pub delta: f64,
    pub value: f64,
}

/// `reason: null` means any reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetJson {
    pub reason: Option<u16>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjustmentJson {
    pub missing_feature: usize,
    pub reason: Option<u16>,
    pub label: String,
    pub steps: Vec<StepJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeJson {
    pub feature: usize,
    pub name: String,
    pub steps: Vec<StepJson>,
    pub missing_offsets: Vec<OffsetJson>,
    pub adjustments: Vec<AdjustmentJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapesJson {
    pub bias: f64,
    pub shapes: Vec<ShapeJson>,
}

fn key_to_reason(key: MissingKey) -> Option<u16> {
    match key {
        MissingKey::Reason(m) => Some(m),
        MissingKey::Overall => None,
    }
}

fn reason_to_key(reason: Option<u16>) -> MissingKey {
    reason.map_or(MissingKey::Overall, MissingKey::Reason)
}

fn step_json(s: &Step) -> StepJson {
    StepJson {
        k: s.k,
        threshold: s.threshold,
        delta: s.delta,
        value: s.value,
    }
}

fn step_from(s: &StepJson) -> Step {
    Step {
        k: s.k,
        threshold: s.threshold,
        delta: s.delta,
        value: s.value,
    }
}

impl ShapesJson {
    pub fn new(bias: f64, shapes: &[ShapeFunction]) -> Self {
        ShapesJson {
            bias,
            shapes: shapes
                .iter()
                .map(|s| ShapeJson {
                    feature: s.feature,
                    name: s.name.clone(),
                    steps: s.steps.iter().map(step_json).collect(),
                    missing_offsets: s
                        .missing_offsets
                        .iter()
                        .map(|&(key, value)| OffsetJson {
                            reason: key_to_reason(key),
                            value,
                        })
                        .collect(),
                    adjustments: s
                        .adjustments
                        .iter()
                        .map(|a| AdjustmentJson {
                            missing_feature: a.missing_feature,
                            reason: key_to_reason(a.key),
                            label: a.label.clone(),
                            steps: a.steps.iter().map(step_json).collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn into_shapes(self) -> (f64, Vec<ShapeFunction>) {
        let shapes = self
            .shapes
            .into_iter()
            .map(|s| ShapeFunction {
                feature: s.feature,
                name: s.name,
                steps: s.steps.iter().map(step_from).collect(),
                missing_offsets: s
                    .missing_offsets
                    .iter()
                    .map(|o| (reason_to_key(o.reason), o.value))
                    .collect(),
                adjustments: s
                    .adjustments
                    .into_iter()
                    .map(|a| Adjustment {
                        missing_feature: a.missing_feature,
                        key: reason_to_key(a.reason),
                        label: a.label,
                        steps: a.steps.iter().map(step_from).collect(),
                    })
                    .collect(),
            })
            .collect();
        (self.bias, shapes)
    }
}

pub fn parse_shapes(text: &str) -> Result<(f64, Vec<ShapeFunction>), Error> {
    serde_json::from_str::<ShapesJson>(text)
        .map(ShapesJson::into_shapes)
        .map_err(|e| bad(format!("shapes JSON: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> Mgam {
        Mgam {
            bias: -0.125,
            lambda0: 0.05,
            terms: vec![
                (ColumnKind::Threshold { feature: 0, k: 1 }, 0.1 + 0.2),
                (ColumnKind::MissInd { feature: 1, reason: 2 }, -1.0 / 3.0),
                (ColumnKind::MissIndOverall { feature: 0 }, 1e-300),
                (
                    ColumnKind::Interaction {
                        missing: 1,
                        feature: 0,
                        k: 0,
                        reason: 1,
                    },
                    2.5,
                ),
                (
                    ColumnKind::InteractionOverall {
                        missing: 0,
                        feature: 1,
                        k: 0,
                    },
                    -7.0,
                ),
            ],
            bins: BinningSpec::new(vec![vec![-0.5, 0.7], vec![3.0]]).unwrap(),
            feature_names: vec!["age".into(), "income".into()],
            n_reasons: 2,
            overall_reason: false,
        }
    }

    #[test]
    fn model_json_round_trip_is_byte_identical() {
        let text = model_to_json(&model());
        let back = parse_model(&text).unwrap();
        assert_eq!(back, model());
        assert_eq!(model_to_json(&back), text);
        assert!(text.find("\"bias\"").unwrap() < text.find("\"lambda0\"").unwrap());
        assert!(text.contains("\"label_rule\": \"score>0->1\""));
    }

    #[test]
    fn coefficients_survive_json_bit_for_bit() {
        let mut m = model();
        let mut bits: u64 = 0x9e37_79b9_7f4a_7c15;
        for _ in 0..2000 {
            bits = bits
                .wrapping_mul(6_364_136_223_846_793_005)
                .wrapping_add(1_442_695_040_888_963_407);
            let v = f64::from_bits(bits >> 2) * if bits & 1 == 0 { 1.0 } else { -1.0 };
            if !v.is_finite() || v == 0.0 {
                continue;
            }
            m.terms[0].1 = v;
            let back = parse_model(&model_to_json(&m)).unwrap();
            assert_eq!(back.terms[0].1.to_bits(), v.to_bits(), "{v:e}");
        }
    }

    #[test]
    fn model_json_rejects_orphans() {
        let mut doc = ModelJson::from(&model());
        doc.coefficients[0].k = Some(5);
        assert!(matches!(doc.into_model(), Err(Error::Orphan(_))));
        let mut doc = ModelJson::from(&model());
        doc.coefficients[0].threshold = Some(0.75);
        assert!(matches!(doc.into_model(), Err(Error::Orphan(_))));
        let mut doc = ModelJson::from(&model());
        doc.coefficients[1].m = Some(9);
        assert!(matches!(doc.into_model(), Err(Error::Orphan(_))));
        let mut doc = ModelJson::from(&model());
        doc.coefficients[1].kind = "XYZ".into();
        assert!(doc.into_model().is_err());
    }

    #[test]
    fn encoding_json_shape() {
        let map =
            parse_encoding(r#"{"na_token": "NA", "add_overall_reason": true, "columns": {"x": {"-7": 1, "-8": 2}}}"#)
                .unwrap();
        assert_eq!(map.resolved_na_reason(), 3);
        assert!(map.add_overall_reason);
        assert!(parse_encoding(r#"{"columns": {"x": {"-7": 2}}}"#).is_err());
        assert!(parse_encoding(r#"{"bogus": 1}"#).is_err());
        let again = parse_encoding(&to_json(&EncodingJson::from(&map))).unwrap();
        assert_eq!(again, map);
    }

    #[test]
    fn mar_spec_accepts_names_and_indices() {
        let spec = parse_mar_spec(r#"{"target": "a", "conditioning": 1, "rate": 0.5}"#).unwrap();
        assert_eq!(spec.quantile_level, 0.6);
        let ds = Dataset::from_options(vec!["a".into(), "b".into()], &[vec![Some(1.0), Some(2.0)]], vec![1]).unwrap();
        let s = spec.resolve(&ds).unwrap();
        assert_eq!((s.target, s.conditioning), (0, 1));
        let bad = parse_mar_spec(r#"{"target": "zz", "conditioning": 1, "rate": 0.5}"#).unwrap();
        assert!(bad.resolve(&ds).is_err());
    }
}
