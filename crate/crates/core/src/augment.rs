//! Quantile thresholds and the augmented boolean design matrix.
//!
//! Columns come in five kinds: thresholds `1[x_j <= t_jk]`, specific and
//! overall missingness indicators, and missingness x threshold
//! interactions `1[mcat(x_j) = m and x_j' <= t_j'k]`. Absent values never
//! satisfy a threshold.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::dataset::{cell_matches_reason, Cell, Dataset};
use crate::error::{Error, Result};

/// Ordered per-feature thresholds learned from training data.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningSpec {
    thresholds: Vec<Vec<f64>>,
}

impl BinningSpec {
    pub fn new(thresholds: Vec<Vec<f64>>) -> Result<BinningSpec> {
        for (j, t) in thresholds.iter().enumerate() {
            if t.iter().any(|v| !v.is_finite()) || t.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!(
                    "thresholds of feature {j} are not finite and strictly increasing"
                )));
            }
        }
        Ok(BinningSpec { thresholds })
    }

    pub fn d(&self) -> usize {
        self.thresholds.len()
    }

    pub fn thresholds(&self, j: usize) -> &[f64] {
        &self.thresholds[j]
    }

    pub fn all(&self) -> &[Vec<f64>] {
        &self.thresholds
    }

    pub fn lens(&self) -> Vec<usize> {
        self.thresholds.iter().map(Vec::len).collect()
    }

    pub fn threshold(&self, j: usize, k: usize) -> Option<f64> {
        self.thresholds.get(j)?.get(k).copied()
    }
}

/// Lower-interpolated empirical quantile: the element at `floor(q (m - 1))`.
pub fn quantile_lower(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    // The epsilon absorbs products like 0.6 * 15 landing just under 9.
    let pos = libm::floor(q * (sorted.len() - 1) as f64 + 1e-9);
    let idx = (pos.max(0.0) as usize).min(sorted.len() - 1);
    Some(sorted[idx])
}

/// Thresholds at quantile levels `k / n_quantiles`, `k = 1..=n_quantiles`.
///
/// Duplicates collapse, and any threshold at or above the largest present
/// value is dropped because it would be all ones on the training rows.
pub fn compute_binning(train: &Dataset, n_quantiles: usize) -> Result<BinningSpec> {
    if n_quantiles == 0 {
        return Err(Error::Config("n_quantiles must be >= 1".into()));
    }
    let thresholds = (0..train.d())
        .map(|j| {
            let mut vals = train.present_values(j);
            vals.sort_by(f64::total_cmp);
            let Some(&max) = vals.last() else {
                return Vec::new();
            };
            let m = vals.len();
            let mut t: Vec<f64> = (1..=n_quantiles)
                .map(|k| vals[k * (m - 1) / n_quantiles])
                .filter(|&v| v < max)
                .collect();
            t.dedup();
            t
        })
        .collect();
    Ok(BinningSpec { thresholds })
}

/// Identity of an augmented column. Feature and threshold indices are
/// 0-based; reason codes are the dataset's codes (>= 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ColumnKind {
    Threshold {
        feature: usize,
        k: usize,
    },
    MissInd {
        feature: usize,
        reason: u16,
    },
    MissIndOverall {
        feature: usize,
    },
    /// `missing` is the feature whose absence gates the column, `feature`
    /// the thresholded one.
    Interaction {
        missing: usize,
        feature: usize,
        k: usize,
        reason: u16,
    },
    InteractionOverall {
        missing: usize,
        feature: usize,
        k: usize,
    },
}

impl ColumnKind {
    /// Bit of this column for row `i` of `ds`.
    pub fn eval(&self, ds: &Dataset, bins: &BinningSpec, i: usize) -> bool {
        self.eval_row(ds.row(i), bins, ds.has_overall_reason().then_some(ds.n_reasons()))
    }

    /// Bit of this column for one row of cells, where `overall` is the
    /// code (if any) that matches every absent cell.
    pub fn eval_row(&self, row: &[Cell], bins: &BinningSpec, overall: Option<u16>) -> bool {
        let below = |j: usize, k: usize| match row[j] {
            Cell::Present(v) => v <= bins.thresholds[j][k],
            Cell::Absent(_) => false,
        };
        match *self {
            ColumnKind::Threshold { feature, k } => below(feature, k),
            ColumnKind::MissInd { feature, reason } => cell_matches_reason(row[feature], reason, overall),
            ColumnKind::MissIndOverall { feature } => row[feature].is_absent(),
            ColumnKind::Interaction {
                missing,
                feature,
                k,
                reason,
            } => cell_matches_reason(row[missing], reason, overall) && below(feature, k),
            ColumnKind::InteractionOverall { missing, feature, k } => row[missing].is_absent() && below(feature, k),
        }
    }

    /// Feature whose shape function the column belongs to.
    pub fn target_feature(&self) -> usize {
        match *self {
            ColumnKind::Threshold { feature, .. }
            | ColumnKind::MissInd { feature, .. }
            | ColumnKind::MissIndOverall { feature }
            | ColumnKind::Interaction { feature, .. }
            | ColumnKind::InteractionOverall { feature, .. } => feature,
        }
    }

    pub fn is_threshold(&self) -> bool {
        matches!(self, ColumnKind::Threshold { .. })
    }

    /// Checks the column's indices against a binning and reason count.
    pub fn check(&self, bins: &BinningSpec, n_reasons: u16) -> Result<()> {
        let d = bins.d();
        let thr_ok = |j: usize, k: usize| j < d && k < bins.thresholds[j].len();
        let ok = match *self {
            ColumnKind::Threshold { feature, k } => thr_ok(feature, k),
            ColumnKind::MissInd { feature, reason } => feature < d && reason >= 1 && reason <= n_reasons,
            ColumnKind::MissIndOverall { feature } => feature < d,
            ColumnKind::Interaction {
                missing,
                feature,
                k,
                reason,
            } => missing < d && missing != feature && thr_ok(feature, k) && reason >= 1 && reason <= n_reasons,
            ColumnKind::InteractionOverall { missing, feature, k } => {
                missing < d && missing != feature && thr_ok(feature, k)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Orphan(format!("column {self} has no counterpart")))
        }
    }

    pub fn parse(token: &str) -> Option<ColumnKind> {
        let mut parts = token.split('_');
        let tag = parts.next()?;
        let nums: Vec<usize> = parts.map(|p| p.parse().ok()).collect::<Option<_>>()?;
        let reason = |v: usize| u16::try_from(v).ok();
        Some(match (tag, nums.as_slice()) {
            ("THR", &[feature, k]) => ColumnKind::Threshold { feature, k },
            ("MI", &[feature, m]) => ColumnKind::MissInd {
                feature,
                reason: reason(m)?,
            },
            ("MIO", &[feature]) => ColumnKind::MissIndOverall { feature },
            ("INT", &[missing, feature, k, m]) => ColumnKind::Interaction {
                missing,
                feature,
                k,
                reason: reason(m)?,
            },
            ("INTO", &[missing, feature, k]) => ColumnKind::InteractionOverall { missing, feature, k },
            _ => return None,
        })
    }
}

/// Header token: `THR_j_k`, `MI_j_m`, `MIO_j`, `INT_j_jp_k_m`, `INTO_j_jp_k`.
impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ColumnKind::Threshold { feature, k } => write!(f, "THR_{feature}_{k}"),
            ColumnKind::MissInd { feature, reason } => write!(f, "MI_{feature}_{reason}"),
            ColumnKind::MissIndOverall { feature } => write!(f, "MIO_{feature}"),
            ColumnKind::Interaction {
                missing,
                feature,
                k,
                reason,
            } => write!(f, "INT_{missing}_{feature}_{k}_{reason}"),
            ColumnKind::InteractionOverall { missing, feature, k } => write!(f, "INTO_{missing}_{feature}_{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentConfig {
    pub n_quantiles: usize,
    pub use_indicators: bool,
    pub use_interactions: bool,
    /// Emit per-reason indicator / interaction columns.
    pub specific: bool,
    /// Emit "any missingness" indicator / interaction columns.
    pub overall: bool,
    pub dedup: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            n_quantiles: 8,
            use_indicators: true,
            use_interactions: true,
            specific: true,
            overall: false,
            dedup: true,
        }
    }
}

impl AugmentConfig {
    /// Thresholds only: an ordinary GAM design.
    pub fn plain() -> Self {
        AugmentConfig {
            use_indicators: false,
            use_interactions: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_quantiles == 0 {
            return Err(Error::Config("n_quantiles must be >= 1".into()));
        }
        if (self.use_indicators || self.use_interactions) && !(self.specific || self.overall) {
            return Err(Error::Config(
                "indicators or interactions need specific and/or overall encodings".into(),
            ));
        }
        Ok(())
    }
}

/// Column kinds in emission order, before deduplication.
pub fn column_kinds(bins: &BinningSpec, n_reasons: u16, cfg: &AugmentConfig) -> Vec<ColumnKind> {
    let d = bins.d();
    let lens = bins.lens();
    let mut kinds = Vec::new();
    for (feature, &len) in lens.iter().enumerate() {
        kinds.extend((0..len).map(|k| ColumnKind::Threshold { feature, k }));
    }
    if cfg.use_indicators && cfg.specific {
        for feature in 0..d {
            kinds.extend((1..=n_reasons).map(|reason| ColumnKind::MissInd { feature, reason }));
        }
    }
    if cfg.use_indicators && cfg.overall {
        kinds.extend((0..d).map(|feature| ColumnKind::MissIndOverall { feature }));
    }
    if cfg.use_interactions && cfg.specific {
        for missing in 0..d {
            for feature in (0..d).filter(|&f| f != missing) {
                for k in 0..lens[feature] {
                    kinds.extend((1..=n_reasons).map(|reason| ColumnKind::Interaction {
                        missing,
                        feature,
                        k,
                        reason,
                    }));
                }
            }
        }
    }
    if cfg.use_interactions && cfg.overall {
        for missing in 0..d {
            for feature in (0..d).filter(|&f| f != missing) {
                kinds.extend((0..lens[feature]).map(|k| ColumnKind::InteractionOverall { missing, feature, k }));
            }
        }
    }
    kinds
}

/// Closed-form pre-dedup column count:
/// `sum len + [ind] (s c + o) d + [int] (s c + o) (d - 1) sum len`, where `s` and `o` flag
/// the specific and overall encodings.
pub fn column_count(d: usize, lens: &[usize], c: usize, cfg: &AugmentConfig) -> Result<usize> {
    if lens.len() != d {
        return Err(Error::Dimension(format!("{} lengths for {d} features", lens.len())));
    }
    let total: usize = lens.iter().sum();
    let per_reason = c * usize::from(cfg.specific) + usize::from(cfg.overall);
    let mut count = total;
    if cfg.use_indicators {
        count += per_reason * d;
    }
    if cfg.use_interactions {
        // sum_j sum_{j' != j} len(t_j') = (d - 1) sum len
        count += per_reason * d.saturating_sub(1) * total;
    }
    Ok(count)
}

/// Why a pre-dedup column is not in the matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alias {
    DuplicateOf(ColumnKind),
    Constant(bool),
}

/// Boolean columns stored as ascending lists of active rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedMatrix {
    n_rows: usize,
    columns: Vec<Vec<u32>>,
    kinds: Vec<ColumnKind>,
    aliases: Vec<(ColumnKind, Alias)>,
}

impl AugmentedMatrix {
    /// Direct construction from active-row lists; used by tests and by
    /// callers with their own boolean features.
    pub fn from_columns(n_rows: usize, columns: Vec<Vec<u32>>, kinds: Vec<ColumnKind>) -> Result<Self> {
        if columns.len() != kinds.len() {
            return Err(Error::Dimension("columns and kinds differ in length".into()));
        }
        for col in &columns {
            if col.windows(2).any(|w| w[0] >= w[1]) || col.last().is_some_and(|&r| r as usize >= n_rows) {
                return Err(Error::Dimension("column rows must ascend within 0..n".into()));
            }
        }
        Ok(AugmentedMatrix {
            n_rows,
            columns,
            kinds,
            aliases: Vec::new(),
        })
    }

    /// Matrix from dense boolean rows; kinds are placeholder thresholds.
    pub fn from_dense(rows: &[Vec<bool>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let columns = (0..p)
            .map(|c| {
                rows.iter()
                    .enumerate()
                    .filter(|(_, r)| r[c])
                    .map(|(i, _)| i as u32)
                    .collect()
            })
            .collect();
        let kinds = (0..p).map(|c| ColumnKind::Threshold { feature: c, k: 0 }).collect();
        Self::from_columns(rows.len(), columns, kinds)
    }

    /// Evaluates the given column kinds on `ds` without deduplication.
    pub fn from_kinds(ds: &Dataset, bins: &BinningSpec, kinds: &[ColumnKind]) -> Result<Self> {
        if bins.d() != ds.d() {
            return Err(Error::Dimension(format!(
                "binning has {} features, dataset {}",
                bins.d(),
                ds.d()
            )));
        }
        for kind in kinds {
            kind.check(bins, ds.n_reasons())?;
        }
        let columns = kinds
            .iter()
            .map(|kind| {
                (0..ds.n())
                    .filter(|&i| kind.eval(ds, bins, i))
                    .map(|i| i as u32)
                    .collect()
            })
            .collect();
        Ok(AugmentedMatrix {
            n_rows: ds.n(),
            columns,
            kinds: kinds.to_vec(),
            aliases: Vec::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn kind(&self, c: usize) -> ColumnKind {
        self.kinds[c]
    }

    pub fn active_rows(&self, c: usize) -> &[u32] {
        &self.columns[c]
    }

    pub fn aliases(&self) -> &[(ColumnKind, Alias)] {
        &self.aliases
    }

    pub fn get(&self, i: usize, c: usize) -> bool {
        self.columns[c].binary_search(&(i as u32)).is_ok()
    }

    pub fn column_bits(&self, c: usize) -> Vec<bool> {
        let mut bits = alloc::vec![false; self.n_rows];
        for &r in &self.columns[c] {
            bits[r as usize] = true;
        }
        bits
    }

    pub fn row_bits(&self, i: usize) -> Vec<bool> {
        (0..self.n_cols()).map(|c| self.get(i, c)).collect()
    }

    pub fn dense_rows(&self) -> Vec<Vec<bool>> {
        let mut rows = alloc::vec![alloc::vec![false; self.n_cols()]; self.n_rows];
        for (c, col) in self.columns.iter().enumerate() {
            for &r in col {
                rows[r as usize][c] = true;
            }
        }
        rows
    }

    pub fn column_index(&self, kind: &ColumnKind) -> Option<usize> {
        self.kinds.iter().position(|k| k == kind)
    }

    /// Drops constant and repeated columns, keeping the earliest of each
    /// duplicate group and recording where every dropped column went.
    pub fn dedup(self) -> AugmentedMatrix {
        let n = self.n_rows;
        let mut seen: BTreeMap<&[u32], ColumnKind> = BTreeMap::new();
        let mut keep = Vec::with_capacity(self.columns.len());
        let mut aliases = self.aliases.clone();
        for (col, kind) in self.columns.iter().zip(&self.kinds) {
            if col.is_empty() || col.len() == n {
                aliases.push((*kind, Alias::Constant(!col.is_empty())));
            } else if let Some(rep) = seen.get(col.as_slice()) {
                aliases.push((*kind, Alias::DuplicateOf(*rep)));
            } else {
                seen.insert(col.as_slice(), *kind);
                keep.push(true);
                continue;
            }
            keep.push(false);
        }
        let mut columns = Vec::new();
        let mut kinds = Vec::new();
        for ((col, kind), k) in self.columns.into_iter().zip(self.kinds).zip(keep) {
            if k {
                columns.push(col);
                kinds.push(kind);
            }
        }
        AugmentedMatrix {
            n_rows: n,
            columns,
            kinds,
            aliases,
        }
    }
}

pub fn build_augmented(ds: &Dataset, bins: &BinningSpec, cfg: &AugmentConfig) -> Result<AugmentedMatrix> {
    cfg.validate()?;
    let kinds = column_kinds(bins, ds.n_reasons(), cfg);
    let m = AugmentedMatrix::from_kinds(ds, bins, &kinds)?;
    Ok(if cfg.dedup { m.dedup() } else { m })
}

/// Header-token rendering of a full column set, e.g. for dumps.
pub fn header_tokens(kinds: &[ColumnKind]) -> Vec<String> {
    kinds.iter().map(|k| format!("{k}")).collect()
}
