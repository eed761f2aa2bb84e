//! Tabular data with per-cell missingness reasons.
//!
//! A cell is either a finite real value or absent with a reason code in
//! `1..=c`. Reason `0` is reserved for present cells, so the code of a cell
//! and its presence can never disagree. Sentinel values are resolved when a
//! table is turned into a [`Dataset`]; nothing downstream sees them.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::num::NonZeroU16;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Present(f64),
    Absent(NonZeroU16),
}

impl Cell {
    pub fn absent(reason: u16) -> Cell {
        Cell::Absent(NonZeroU16::new(reason).expect("absent cells carry a reason >= 1"))
    }

    /// `mcat` of the cell: 0 when present, the reason code otherwise.
    pub fn reason(&self) -> u16 {
        match self {
            Cell::Present(_) => 0,
            Cell::Absent(r) => r.get(),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Cell::Present(v) => Some(*v),
            Cell::Absent(_) => None,
        }
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, Cell::Absent(_))
    }
}

/// Row-major table of cells with binary labels.
///
/// `n_reasons` is `c`. When `overall_reason` is set, code `c` is the
/// "any missingness" reason: no cell stores it, but it matches every
/// absent cell (see [`Dataset::matches_reason`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    cells: Vec<Cell>,
    labels: Vec<u8>,
    n_reasons: u16,
    overall_reason: bool,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        cells: Vec<Cell>,
        labels: Vec<u8>,
        n_reasons: u16,
        overall_reason: bool,
    ) -> Result<Dataset> {
        let d = feature_names.len();
        let n = labels.len();
        if cells.len() != n * d {
            return Err(Error::InvalidDataset(format!(
                "{} cells for {n} rows x {d} features",
                cells.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::InvalidDataset(format!("label at row {i} is not 0 or 1")));
        }
        if overall_reason && n_reasons == 0 {
            return Err(Error::InvalidDataset(
                "overall reason requires at least one reason code".into(),
            ));
        }
        let specific = n_reasons - u16::from(overall_reason);
        for (idx, cell) in cells.iter().enumerate() {
            match cell {
                Cell::Present(v) if !v.is_finite() => {
                    return Err(Error::InvalidDataset(format!(
                        "non-finite value at row {}, feature {}",
                        idx / d.max(1),
                        idx % d.max(1)
                    )));
                }
                Cell::Absent(r) if r.get() > specific => {
                    return Err(Error::InvalidDataset(format!(
                        "reason {} exceeds the {specific} specific reason(s)",
                        r.get()
                    )));
                }
                _ => {}
            }
        }
        Ok(Dataset {
            feature_names,
            cells,
            labels,
            n_reasons,
            overall_reason,
        })
    }

    /// Builds a dataset where every `None` is absent with reason 1.
    pub fn from_options(feature_names: Vec<String>, rows: &[Vec<Option<f64>>], labels: Vec<u8>) -> Result<Dataset> {
        let d = feature_names.len();
        let mut cells = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} values, expected {d}",
                    row.len()
                )));
            }
            cells.extend(row.iter().map(|v| match v {
                Some(x) => Cell::Present(*x),
                None => Cell::absent(1),
            }));
        }
        let any_missing = cells.iter().any(Cell::is_absent);
        Dataset::new(feature_names, cells, labels, u16::from(any_missing), false)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.feature_names.len()
    }

    /// Number of reason codes `c`, including the overall code when present.
    pub fn n_reasons(&self) -> u16 {
        self.n_reasons
    }

    pub fn has_overall_reason(&self) -> bool {
        self.overall_reason
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn row(&self, i: usize) -> &[Cell] {
        let d = self.d();
        &self.cells[i * d..(i + 1) * d]
    }

    pub fn cell(&self, i: usize, j: usize) -> Cell {
        self.cells[i * self.d() + j]
    }

    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        self.cell(i, j).value()
    }

    pub fn reason(&self, i: usize, j: usize) -> u16 {
        self.cell(i, j).reason()
    }

    /// Whether `mcat(x_ij) = m`, where the overall code matches any absent cell.
    pub fn matches_reason(&self, i: usize, j: usize, m: u16) -> bool {
        cell_matches_reason(self.cell(i, j), m, self.overall_code())
    }

    pub(crate) fn overall_code(&self) -> Option<u16> {
        self.overall_reason.then_some(self.n_reasons)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    pub fn present_values(&self, j: usize) -> Vec<f64> {
        (0..self.n()).filter_map(|i| self.value(i, j)).collect()
    }

    pub fn count_absent(&self) -> usize {
        self.cells.iter().filter(|c| c.is_absent()).count()
    }

    /// Rows in the given order; reason bookkeeping is inherited.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let d = self.d();
        let mut cells = Vec::with_capacity(rows.len() * d);
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            cells.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            cells,
            labels,
            n_reasons: self.n_reasons,
            overall_reason: self.overall_reason,
        }
    }

    /// Replaces every absent cell with `fill[j]` and drops all reason codes.
    pub fn fill_missing(&self, fill: &[f64]) -> Dataset {
        let d = self.d();
        let cells = self
            .cells
            .iter()
            .enumerate()
            .map(|(idx, c)| match c {
                Cell::Present(_) => *c,
                Cell::Absent(_) => Cell::Present(fill[idx % d]),
            })
            .collect();
        Dataset {
            feature_names: self.feature_names.clone(),
            cells,
            labels: self.labels.clone(),
            n_reasons: 0,
            overall_reason: false,
        }
    }

    /// Mean of the present values of each feature (0 for an all-absent feature).
    pub fn column_means(&self) -> Vec<f64> {
        (0..self.d())
            .map(|j| {
                let vals = self.present_values(j);
                if vals.is_empty() {
                    0.0
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                }
            })
            .collect()
    }
}

pub(crate) fn cell_matches_reason(cell: Cell, m: u16, overall: Option<u16>) -> bool {
    let r = cell.reason();
    r != 0 && (r == m || overall == Some(m))
}

/// How raw text cells map to reason codes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EncodingMap {
    /// Token (besides the empty string) that marks a missing cell.
    pub na_token: Option<String>,
    /// Reason assigned to empty / NA-token cells; defaults to one past the
    /// largest sentinel reason.
    pub na_reason: Option<u16>,
    pub add_overall_reason: bool,
    /// Per-column sentinel text and the reason it encodes.
    pub columns: BTreeMap<String, Vec<(String, u16)>>,
}

impl EncodingMap {
    pub fn validate(&self) -> Result<()> {
        let mut declared: Vec<u16> = Vec::new();
        for (col, sentinels) in &self.columns {
            for (idx, (text, code)) in sentinels.iter().enumerate() {
                if *code == 0 {
                    return Err(Error::InvalidEncoding(format!(
                        "column `{col}`: sentinel `{text}` maps to reason 0"
                    )));
                }
                for (other, _) in &sentinels[..idx] {
                    if sentinel_eq(text, other) {
                        return Err(Error::InvalidEncoding(format!(
                            "column `{col}`: sentinels `{other}` and `{text}` collide"
                        )));
                    }
                }
                declared.push(*code);
            }
        }
        if let Some(r) = self.na_reason {
            if r == 0 {
                return Err(Error::InvalidEncoding("na_reason must be >= 1".into()));
            }
        }
        declared.push(self.resolved_na_reason());
        declared.sort_unstable();
        declared.dedup();
        if declared.iter().enumerate().any(|(i, &c)| c as usize != i + 1) {
            return Err(Error::InvalidEncoding(format!(
                "reason codes {declared:?} are not contiguous from 1"
            )));
        }
        Ok(())
    }

    pub fn resolved_na_reason(&self) -> u16 {
        self.na_reason.unwrap_or_else(|| {
            self.columns
                .values()
                .flat_map(|s| s.iter().map(|(_, c)| *c))
                .max()
                .unwrap_or(0)
                + 1
        })
    }

    fn sentinel_for(&self, column: &str, text: &str) -> Option<u16> {
        self.columns
            .get(column)?
            .iter()
            .find(|(s, _)| sentinel_eq(s, text))
            .map(|(_, c)| *c)
    }

    /// Text that encodes `reason` for `column` when writing a table.
    pub fn token_for(&self, column: &str, reason: u16) -> Option<String> {
        if let Some((s, _)) = self
            .columns
            .get(column)
            .and_then(|s| s.iter().find(|(_, c)| *c == reason))
        {
            return Some(s.clone());
        }
        if reason == self.resolved_na_reason() {
            return Some(self.na_token.clone().unwrap_or_default());
        }
        None
    }

    /// Resolves one text cell.
    pub fn resolve(&self, column: &str, text: &str, row: usize) -> Result<Cell> {
        let t = text.trim();
        if t.is_empty() || self.na_token.as_deref() == Some(t) {
            return Ok(Cell::absent(self.resolved_na_reason()));
        }
        if let Some(code) = self.sentinel_for(column, t) {
            return Ok(Cell::absent(code));
        }
        match t.parse::<f64>() {
            Ok(v) if v.is_nan() => Ok(Cell::absent(self.resolved_na_reason())),
            Ok(v) if v.is_finite() => Ok(Cell::Present(v)),
            _ => Err(Error::Parse {
                row,
                column: column.to_string(),
                text: t.to_string(),
            }),
        }
    }
}

/// Sentinels match textually, or numerically when both sides parse.
fn sentinel_eq(a: &str, b: &str) -> bool {
    if a.trim() == b.trim() {
        return true;
    }
    match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

pub fn parse_label(text: &str, row: usize) -> Result<u8> {
    match text.trim().parse::<f64>() {
        Ok(0.0) => Ok(0),
        Ok(1.0) => Ok(1),
        _ => Err(Error::Label {
            row,
            text: text.to_string(),
        }),
    }
}

/// Builds a dataset from a header and rows of text cells.
///
/// Reason codes are resolved here; `c` is the largest code that occurs,
/// plus one for the overall code when the map requests it and any cell is
/// absent.
pub fn from_text_rows<I, R, S>(
    header: &[String],
    rows: I,
    label_column: &str,
    encoding: &EncodingMap,
) -> Result<Dataset>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[S]>,
    S: AsRef<str>,
{
    encoding.validate()?;
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::InvalidDataset(format!("label column `{label_column}` not found")))?;
    let feature_idx: Vec<usize> = (0..header.len()).filter(|&k| k != label_idx).collect();
    let feature_names: Vec<String> = feature_idx.iter().map(|&k| header[k].clone()).collect();

    let mut cells = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in rows.into_iter().enumerate() {
        let record = record.as_ref();
        if record.len() != header.len() {
            return Err(Error::InvalidDataset(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        labels.push(parse_label(record[label_idx].as_ref(), row)?);
        for &k in &feature_idx {
            cells.push(encoding.resolve(&header[k], record[k].as_ref(), row)?);
        }
    }
    let max_code = cells.iter().map(Cell::reason).max().unwrap_or(0);
    let overall = encoding.add_overall_reason && max_code > 0;
    Dataset::new(feature_names, cells, labels, max_code + u16::from(overall), overall)
}

/// Seeded shuffle split; returns `(train_rows, test_rows)`, each ascending.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    if n < 2 {
        return Err(Error::Split(format!("need at least 2 rows, have {n}")));
    }
    let n_test = libm::round(n as f64 * test_fraction) as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::Split(format!(
            "fraction {test_fraction} of {n} rows leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.n(), test_fraction, seed)?;
    Ok((ds.select_rows(&train), ds.select_rows(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|j| format!("x{j}")).collect()
    }

    fn fico_map() -> EncodingMap {
        let mut columns = BTreeMap::new();
        columns.insert(
            "a".to_string(),
            vec![("-7".into(), 1), ("-8".into(), 2), ("-9".into(), 3)],
        );
        EncodingMap {
            columns,
            ..Default::default()
        }
    }

    fn header(cols: &[&str]) -> Vec<String> {
        cols.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn fico_sentinel_resolves_to_its_reason() {
        let rows = vec![vec!["-7", "1"], vec!["3.5", "0"], vec!["-9", "1"]];
        let ds = from_text_rows(&header(&["a", "y"]), rows, "y", &fico_map()).unwrap();
        assert_eq!(ds.cell(0, 0), Cell::absent(1));
        assert_eq!(ds.value(1, 0), Some(3.5));
        assert_eq!(ds.reason(2, 0), 3);
        assert_eq!(ds.n_reasons(), 3);
        assert_eq!(ds.labels(), &[1, 0, 1]);
    }

    #[test]
    fn numeric_sentinel_matches_alternate_spelling() {
        let rows = vec![vec!["-7.0", "1"], vec!["-8", "0"]];
        let ds = from_text_rows(&header(&["a", "y"]), rows, "y", &fico_map()).unwrap();
        assert_eq!(ds.reason(0, 0), 1);
        assert_eq!(ds.reason(1, 0), 2);
    }

    #[test]
    fn no_missingness_gives_zero_reasons() {
        let rows = vec![vec!["1", "2", "1"], vec!["3", "4", "0"]];
        let ds = from_text_rows(&header(&["a", "b", "y"]), rows, "y", &fico_map()).unwrap();
        assert_eq!(ds.n_reasons(), 0);
        assert!(ds.cells().iter().all(|c| c.reason() == 0));
    }

    #[test]
    fn fully_missing_column() {
        let rows = vec![vec!["-8", "1", "1"], vec!["-8", "2", "0"]];
        let ds = from_text_rows(&header(&["a", "b", "y"]), rows, "y", &fico_map()).unwrap();
        for i in 0..2 {
            assert_eq!(ds.value(i, 0), None);
            assert_eq!(ds.reason(i, 0), 2);
        }
        assert!(ds.present_values(0).is_empty());
    }

    #[test]
    fn blanks_and_na_token_take_na_reason() {
        let map = EncodingMap {
            na_token: Some("NA".into()),
            ..Default::default()
        };
        let rows = vec![vec!["", "1"], vec!["NA", "0"], vec!["2", "1"]];
        let ds = from_text_rows(&header(&["a", "y"]), rows, "y", &map).unwrap();
        assert_eq!(ds.reason(0, 0), 1);
        assert_eq!(ds.reason(1, 0), 1);
        assert_eq!(ds.reason(2, 0), 0);
        // With sentinels declared, blanks get the next code.
        let rows = vec![vec!["", "1"], vec!["-7", "0"]];
        let ds = from_text_rows(&header(&["a", "y"]), rows, "y", &fico_map()).unwrap();
        assert_eq!(ds.reason(0, 0), 4);
        assert_eq!(ds.n_reasons(), 4);
    }

    #[test]
    fn overall_reason_is_last_and_matches_any_absence() {
        let mut map = fico_map();
        map.add_overall_reason = true;
        let rows = vec![vec!["-7", "1"], vec!["-9", "0"], vec!["1", "0"]];
        let ds = from_text_rows(&header(&["a", "y"]), rows, "y", &map).unwrap();
        assert_eq!(ds.n_reasons(), 4);
        assert!(ds.has_overall_reason());
        assert!(ds.matches_reason(0, 0, 4));
        assert!(ds.matches_reason(1, 0, 4));
        assert!(!ds.matches_reason(2, 0, 4));
        assert!(ds.matches_reason(0, 0, 1));
        assert!(!ds.matches_reason(1, 0, 1));
    }

    #[test]
    fn parse_errors_name_row_and_column() {
        let rows = vec![vec!["1", "1"], vec!["abc", "0"]];
        let err = from_text_rows(&header(&["a", "y"]), rows, "y", &fico_map()).unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                row: 1,
                column: "a".into(),
                text: "abc".into()
            }
        );
    }

    #[test]
    fn label_errors() {
        let rows = vec![vec!["1", "2"]];
        assert!(matches!(
            from_text_rows(&header(&["a", "y"]), rows, "y", &fico_map()),
            Err(Error::Label { row: 0, .. })
        ));
        let rows = vec![vec!["1", ""]];
        assert!(matches!(
            from_text_rows(&header(&["a", "y"]), rows, "y", &fico_map()),
            Err(Error::Label { .. })
        ));
        let rows: Vec<Vec<&str>> = vec![vec!["1", "1"]];
        assert!(matches!(
            from_text_rows(&header(&["a", "b"]), rows, "y", &fico_map()),
            Err(Error::InvalidDataset(_))
        ));
    }

    #[test]
    fn encoding_validation() {
        let mut map = fico_map();
        map.columns.get_mut("a").unwrap().push(("-7.00".into(), 2));
        assert!(matches!(map.validate(), Err(Error::InvalidEncoding(_))));

        let mut columns = BTreeMap::new();
        columns.insert("a".to_string(), vec![("-1".to_string(), 3)]);
        let gap = EncodingMap {
            columns,
            na_reason: Some(4),
            ..Default::default()
        };
        assert!(matches!(gap.validate(), Err(Error::InvalidEncoding(_))));
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let (train, test) = split_indices(10, 0.2, 7).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split_indices(10, 0.2, 7).unwrap(), (train, test));
    }

    #[test]
    fn split_rounds_half_up() {
        // round(3 * 0.5) = round(1.5) = 2 test rows.
        let (train, test) = split_indices(3, 0.5, 1).unwrap();
        assert_eq!((train.len(), test.len()), (1, 2));
    }

    #[test]
    fn split_errors() {
        assert!(split_indices(10, 0.0, 1).is_err());
        assert!(split_indices(10, 1.0, 1).is_err());
        assert!(split_indices(1, 0.5, 1).is_err());
        assert!(split_indices(10, 0.01, 1).is_err());
        assert!(split_indices(10, 0.99, 1).is_err());
    }

    #[test]
    fn split_datasets_keep_reason_bookkeeping() {
        let rows: Vec<Vec<Option<f64>>> = (0..6)
            .map(|i| vec![if i % 2 == 0 { None } else { Some(i as f64) }, Some(1.0)])
            .collect();
        let ds = Dataset::from_options(names(2), &rows, vec![0, 1, 0, 1, 0, 1]).unwrap();
        let (tr, te) = split(&ds, 0.5, 3).unwrap();
        assert_eq!(tr.n() + te.n(), 6);
        assert_eq!(tr.n_reasons(), 1);
        assert_eq!(te.n_reasons(), 1);
    }

    #[test]
    fn dataset_rejects_bad_reasons() {
        let cells = vec![Cell::absent(2)];
        assert!(Dataset::new(names(1), cells, vec![0], 1, false).is_err());
        let cells = vec![Cell::Present(f64::INFINITY)];
        assert!(Dataset::new(names(1), cells, vec![0], 0, false).is_err());
    }
}
