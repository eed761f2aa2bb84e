//! Subcommands. Usage errors exit 2 (reported by clap); operational
//! failures exit 1 after printing one `error[<kind>]: <message>` line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mgam_core::augment::{compute_binning, AugmentConfig};
use mgam_core::eval::{self, cross_validate, fit_models, Metric};
use mgam_core::shapes::{export_shapes, MissingKey, ShapeFunction, Step};
use mgam_core::solver::DEFAULT_LAMBDA_GRID;
use mgam_core::synth::{gen_synthetic, inject_mar, Generator};
use mgam_core::{build_augmented, Dataset, EncodingMap, Error, FitConfig, Mgam};
use serde::Serialize;

use crate::formats::{
    model_to_json, parse_encoding, parse_mar_spec, parse_model, to_json, BinningJson, CvReportJson, EncodingJson,
    GeneratorMetaJson, MetricsJson, ShapesJson, SPARSITY_NOTE,
};
use crate::io::{dataset_to_csv, load_dataset, matrix_to_csv, parse_dataset_maybe_unlabelled, read_text, write_text};
use crate::theory_report;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "mgam", version, about = "Sparse GAMs that model missing values directly")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the augmented 0/1 design matrix and the binning it was built with.
    Augment(AugmentCmd),
    /// Fit one model at a fixed lambda0.
    Fit(FitCmd),
    /// Fit a warm-started regularization path.
    Path(PathCmd),
    /// Select lambda0 by stratified k-fold cross-validation and refit.
    Cv(CvCmd),
    /// Score a table with a saved model.
    Predict(PredictCmd),
    /// Add outcome-dependent missingness to one column.
    InjectMar(InjectMarCmd),
    /// Generate a synthetic dataset with known additive structure.
    Gen(GenCmd),
    /// Export per-feature step functions of a saved model.
    Shapes(ShapesCmd),
    /// Check the exact and numerical claims about missingness and imputation.
    TheoryCheck(TheoryCmd),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV table (`-` for stdin).
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the 0/1 label column.
    #[arg(long, default_value = "label")]
    pub label: String,
    /// Encoding map JSON: NA token and per-column sentinel values.
    #[arg(long)]
    pub encoding: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncodingMode {
    Specific,
    Overall,
    Both,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Quantile thresholds per feature.
    #[arg(long, default_value_t = 8)]
    pub quantiles: usize,
    /// Omit missingness indicator columns.
    #[arg(long)]
    pub no_indicators: bool,
    /// Omit missingness interaction columns.
    #[arg(long)]
    pub no_interactions: bool,
    /// Per-reason columns, "any reason" columns, or both.
    #[arg(long, value_enum, default_value_t = EncodingMode::Specific)]
    pub encoding_mode: EncodingMode,
    /// Keep constant and duplicate columns.
    #[arg(long)]
    pub no_dedup: bool,
}

impl AugmentArgs {
    pub fn config(&self) -> AugmentConfig {
        AugmentConfig {
            n_quantiles: self.quantiles,
            use_indicators: !self.no_indicators,
            use_interactions: !self.no_interactions,
            specific: self.encoding_mode != EncodingMode::Overall,
            overall: self.encoding_mode != EncodingMode::Specific,
            dedup: !self.no_dedup,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Largest number of nonzero coefficients.
    #[arg(long, default_value_t = 100)]
    pub max_support: usize,
    #[arg(long, default_value_t = 200)]
    pub max_sweeps: usize,
    /// Stop once a sweep lowers the objective by less than this.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Skip the swap search.
    #[arg(long)]
    pub no_swaps: bool,
}

impl FitArgs {
    pub fn config(&self, lambda0: f64) -> FitConfig {
        FitConfig {
            lambda0,
            max_support_size: self.max_support,
            max_sweeps: self.max_sweeps,
            tol: self.tol,
            swap_search: !self.no_swaps,
        }
    }
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Comma-separated lambda0 values; fitted in descending order.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
}

impl GridArgs {
    pub fn grid(&self) -> Vec<f64> {
        let mut g = self.lambdas.clone().unwrap_or_else(|| DEFAULT_LAMBDA_GRID.to_vec());
        g.sort_by(|a, b| b.total_cmp(a));
        g.dedup();
        g
    }
}

#[derive(Debug, Args)]
pub struct AugmentCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub augment: AugmentArgs,
    /// Augmented CSV (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Binning JSON.
    #[arg(long)]
    pub binning_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub augment: AugmentArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Penalty per nonzero coefficient.
    #[arg(long)]
    pub lambda: f64,
    /// Model JSON (stdout if omitted).
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Training-set metrics JSON.
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PathCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub augment: AugmentArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Held-out table for the metric columns (training data if omitted).
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Directory for `model_<i>.json` and `path.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub augment: AugmentArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value = "accuracy")]
    pub metric: Metric,
    /// Seed of the fold assignment.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CV report JSON (stdout if omitted).
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// Model refit on all rows at the selected lambda0.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictCmd {
    /// Model JSON.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Scores CSV (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Metrics JSON; needs the label column.
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InjectMarCmd {
    #[command(flatten)]
    pub data: DataArgs,
    /// MAR spec JSON: target, conditioning, rate, quantile_level, seed.
    #[arg(long)]
    pub spec: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Modified CSV (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Encoding map that reads the modified CSV back.
    #[arg(long)]
    pub encoding_out: Option<PathBuf>,
    /// Summary JSON: cut, reason code, eligible and injected counts.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenCmd {
    #[arg(long, default_value = "sparse-additive")]
    pub generator: Generator,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Name of the label column written.
    #[arg(long, default_value = "label")]
    pub label: String,
    /// CSV (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Generator metadata JSON.
    #[arg(long)]
    pub meta_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ShapesCmd {
    /// Model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Shapes JSON (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Long-format step CSV.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TheoryCmd {
    /// Monte-Carlo draws for the sampling cross-check (0 skips it).
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_samples: usize,
    /// Random imputer constructions checked by enumeration.
    #[arg(long, default_value_t = 100)]
    pub constructions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            1
        }
    }
}

pub fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Augment(c) => augment(c),
        Command::Fit(c) => fit(c),
        Command::Path(c) => path(c),
        Command::Cv(c) => cv(c),
        Command::Predict(c) => predict(c),
        Command::InjectMar(c) => inject(c),
        Command::Gen(c) => gen(c),
        Command::Shapes(c) => shapes(c),
        Command::TheoryCheck(c) => theory(c),
    }
}

fn encoding(path: Option<&Path>) -> Result<EncodingMap, CliError> {
    match path {
        Some(p) => Ok(parse_encoding(&read_text(p)?)?),
        None => Ok(EncodingMap::default()),
    }
}

fn load(args: &DataArgs) -> Result<(Dataset, EncodingMap), CliError> {
    let enc = encoding(args.encoding.as_deref())?;
    let ds = load_dataset(&args.data, &args.label, &enc)?;
    Ok((ds, enc))
}

fn write_opt(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_text(Some(p), text),
        None => Ok(()),
    }
}

fn metrics(m: &Mgam, ds: &Dataset) -> Result<MetricsJson, CliError> {
    let scores = m.scores(ds)?;
    let labels = ds.labels();
    let both_classes = labels.contains(&0) && labels.contains(&1);
    Ok(MetricsJson {
        rows: ds.n(),
        accuracy: eval::accuracy(&scores, labels)?,
        auc: if both_classes {
            Some(eval::auc(&scores, labels)?)
        } else {
            None
        },
        nonzero_coefficients: m.sparsity(),
        note: SPARSITY_NOTE.into(),
    })
}

fn augment(c: AugmentCmd) -> Result<(), CliError> {
    let (ds, _) = load(&c.data)?;
    let cfg = c.augment.config();
    let bins = compute_binning(&ds, cfg.n_quantiles)?;
    let x = build_augmented(&ds, &bins, &cfg)?;
    write_opt(c.binning_out.as_deref(), &to_json(&BinningJson::new(&bins, &ds)))?;
    write_text(c.out.as_deref(), &matrix_to_csv(&x, ds.labels(), &c.data.label)?)
}

fn fit(c: FitCmd) -> Result<(), CliError> {
    let (ds, _) = load(&c.data)?;
    let cfg = c.fit.config(c.lambda);
    cfg.validate()?;
    let m = fit_models(&ds, &[c.lambda], &c.augment.config(), &cfg)?
        .pop()
        .expect("one lambda gives one model");
    write_opt(c.metrics_out.as_deref(), &to_json(&metrics(&m, &ds)?))?;
    write_text(c.model_out.as_deref(), &model_to_json(&m))
}

fn path(c: PathCmd) -> Result<(), CliError> {
    let (ds, enc) = load(&c.data)?;
    let test = match &c.test {
        Some(p) => load_dataset(p, &c.data.label, &enc)?,
        None => ds.clone(),
    };
    let grid = c.grid.grid();
    let models = fit_models(&ds, &grid, &c.augment.config(), &c.fit.config(grid[0]))?;
    fs::create_dir_all(&c.out_dir).map_err(|e| CliError::Io(format!("{}: {e}", c.out_dir.display())))?;
    let mut table = String::from("index,lambda0,nonzero_coefficients,accuracy,auc\n");
    for (i, m) in models.iter().enumerate() {
        write_text(Some(&c.out_dir.join(format!("model_{i:02}.json"))), &model_to_json(m))?;
        let mj = metrics(m, &test)?;
        let auc = mj.auc.map_or(String::new(), |a| a.to_string());
        table.push_str(&format!(
            "{i},{},{},{},{auc}\n",
            m.lambda0, mj.nonzero_coefficients, mj.accuracy
        ));
    }
    write_text(Some(&c.out_dir.join("path.csv")), &table)?;
    write_text(None, &table)
}

fn cv(c: CvCmd) -> Result<(), CliError> {
    let (ds, _) = load(&c.data)?;
    let grid = c.grid.grid();
    let aug = c.augment.config();
    let report = cross_validate(&ds, &grid, c.folds, c.metric, &aug, &c.fit.config(grid[0]), c.seed)?;
    if let Some(p) = &c.model_out {
        let m = fit_models(&ds, &[report.best_lambda], &aug, &c.fit.config(report.best_lambda))?
            .pop()
            .expect("one lambda gives one model");
        write_text(Some(p), &model_to_json(&m))?;
    }
    write_text(c.report_out.as_deref(), &to_json(&CvReportJson::from(&report)))
}

fn predict(c: PredictCmd) -> Result<(), CliError> {
    let m = parse_model(&read_text(&c.model)?)?;
    let enc = encoding(c.data.encoding.as_deref())?;
    let (ds, labelled) = parse_dataset_maybe_unlabelled(&read_text(&c.data.data)?, &c.data.label, &enc)?;
    if ds.feature_names() != m.feature_names.as_slice() {
        return Err(Error::Dimension(format!(
            "model features [{}] differ from data features [{}]",
            m.feature_names.join(", "),
            ds.feature_names().join(", ")
        ))
        .into());
    }
    let scores = m.scores(&ds)?;
    let mut out = String::from("row,score,predicted");
    if labelled {
        out.push_str(",label");
    }
    out.push('\n');
    for (i, s) in scores.iter().enumerate() {
        out.push_str(&format!("{i},{s},{}", mgam_core::model::predict_label(*s)));
        if labelled {
            out.push_str(&format!(",{}", ds.labels()[i]));
        }
        out.push('\n');
    }
    if let Some(p) = &c.metrics_out {
        if !labelled {
            return Err(Error::InvalidDataset(format!("metrics need the label column `{}`", c.data.label)).into());
        }
        write_text(Some(p), &to_json(&metrics(&m, &ds)?))?;
    }
    write_text(c.out.as_deref(), &out)
}

#[derive(Serialize)]
struct InjectReport {
    target: String,
    conditioning: String,
    rate: f64,
    quantile_level: f64,
    seed: u64,
    cut: f64,
    reason: Option<u16>,
    eligible: usize,
    injected: usize,
}

fn inject(c: InjectMarCmd) -> Result<(), CliError> {
    let (ds, enc) = load(&c.data)?;
    let mut spec = parse_mar_spec(&read_text(&c.spec)?)?.resolve(&ds)?;
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    let outcome = inject_mar(&ds, &spec)?;
    let (text, map) = dataset_to_csv(&outcome.dataset, &c.data.label, &enc)?;
    write_opt(c.encoding_out.as_deref(), &to_json(&EncodingJson::from(&map)))?;
    let report = InjectReport {
        target: ds.feature_names()[spec.target].clone(),
        conditioning: ds.feature_names()[spec.conditioning].clone(),
        rate: spec.rate,
        quantile_level: spec.quantile_level,
        seed: spec.seed,
        cut: outcome.cut,
        reason: outcome.reason,
        eligible: outcome.eligible,
        injected: outcome.injected,
    };
    write_opt(c.report_out.as_deref(), &to_json(&report))?;
    write_text(c.out.as_deref(), &text)
}

fn gen(c: GenCmd) -> Result<(), CliError> {
    let s = gen_synthetic(c.n, c.d, c.seed, c.generator)?;
    let (text, _) = dataset_to_csv(&s.dataset, &c.label, &EncodingMap::default())?;
    write_opt(c.meta_out.as_deref(), &to_json(&GeneratorMetaJson::from(&s.meta)))?;
    write_text(c.out.as_deref(), &text)
}

fn key_text(key: MissingKey) -> String {
    match key {
        MissingKey::Reason(m) => m.to_string(),
        MissingKey::Overall => "any".into(),
    }
}

/// Long format: one row per step, offset or adjustment step.
pub fn shapes_csv(shapes: &[ShapeFunction]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "feature",
        "name",
        "curve",
        "missing_feature",
        "reason",
        "k",
        "threshold",
        "delta",
        "value",
    ])?;
    let step_rec = |s: &ShapeFunction, curve: &str, mf: &str, reason: &str, st: &Step| {
        vec![
            s.feature.to_string(),
            s.name.clone(),
            curve.to_string(),
            mf.to_string(),
            reason.to_string(),
            st.k.to_string(),
            st.threshold.to_string(),
            st.delta.to_string(),
            st.value.to_string(),
        ]
    };
    for s in shapes {
        for st in &s.steps {
            w.write_record(step_rec(s, "base", "", "", st))?;
        }
        for &(key, v) in &s.missing_offsets {
            w.write_record([
                s.feature.to_string(),
                s.name.clone(),
                "missing".into(),
                s.feature.to_string(),
                key_text(key),
                String::new(),
                String::new(),
                v.to_string(),
                v.to_string(),
            ])?;
        }
        for a in &s.adjustments {
            for st in &a.steps {
                w.write_record(step_rec(
                    s,
                    &a.label,
                    &a.missing_feature.to_string(),
                    &key_text(a.key),
                    st,
                ))?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn shapes(c: ShapesCmd) -> Result<(), CliError> {
    let m = parse_model(&read_text(&c.model)?)?;
    let shapes = export_shapes(&m)?;
    write_opt(c.csv_out.as_deref(), &shapes_csv(&shapes)?)?;
    write_text(c.out.as_deref(), &to_json(&ShapesJson::new(m.bias, &shapes)))
}

fn theory(c: TheoryCmd) -> Result<(), CliError> {
    let claims = theory_report::run(&theory_report::Options {
        mc_samples: c.mc_samples,
        constructions: c.constructions,
        seed: c.seed,
    });
    write_text(None, &theory_report::render(&claims))?;
    match claims.iter().filter(|c| !c.passed).count() {
        0 => Ok(()),
        n => Err(CliError::Claims(n)),
    }
}
