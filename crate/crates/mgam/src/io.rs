//! CSV tables in and out.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use mgam_core::augment::{header_tokens, AugmentedMatrix};
use mgam_core::dataset::from_text_rows;
use mgam_core::{Cell, Dataset, EncodingMap, Error};

use crate::CliError;

/// Reads a file, or stdin for `-`.
pub fn read_text(path: &Path) -> Result<String, CliError> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes a file, or stdout when `path` is `None` or `-`.
pub fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) if p != Path::new("-") => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        _ => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn records(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

/// Parses a labelled CSV table.
pub fn parse_dataset(text: &str, label: &str, encoding: &EncodingMap) -> Result<Dataset, CliError> {
    let (header, rows) = records(text)?;
    Ok(from_text_rows(&header, &rows, label, encoding)?)
}

/// Parses a CSV table that may lack the label column; missing labels read
/// as 0 and the flag reports whether real labels were present.
pub fn parse_dataset_maybe_unlabelled(
    text: &str,
    label: &str,
    encoding: &EncodingMap,
) -> Result<(Dataset, bool), CliError> {
    let (mut header, mut rows) = records(text)?;
    let labelled = header.iter().any(|h| h == label);
    if !labelled {
        header.push(label.to_string());
        rows.iter_mut().for_each(|r| r.push("0".into()));
    }
    Ok((from_text_rows(&header, &rows, label, encoding)?, labelled))
}

pub fn load_dataset(path: &Path, label: &str, encoding: &EncodingMap) -> Result<Dataset, CliError> {
    parse_dataset(&read_text(path)?, label, encoding)
}

/// Renders a dataset as CSV with the label last. Absent cells use the
/// map's token for their reason; reasons without one get a fresh `NA<m>`
/// sentinel, and the returned map (which reads the table back to the same
/// dataset) records them.
pub fn dataset_to_csv(ds: &Dataset, label: &str, encoding: &EncodingMap) -> Result<(String, EncodingMap), CliError> {
    let mut map = encoding.clone();
    map.na_reason = Some(encoding.resolved_na_reason());
    if ds.has_overall_reason() {
        map.add_overall_reason = true;
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = ds.feature_names().iter().map(String::as_str).collect();
    header.push(label);
    w.write_record(&header)?;
    for i in 0..ds.n() {
        let mut rec: Vec<String> = Vec::with_capacity(ds.d() + 1);
        for (j, cell) in ds.row(i).iter().enumerate() {
            rec.push(match *cell {
                Cell::Present(v) => format!("{v}"),
                Cell::Absent(r) => {
                    let col = &ds.feature_names()[j];
                    match map.token_for(col, r.get()) {
                        Some(t) => t,
                        None => {
                            let token = format!("NA{}", r.get());
                            map.columns
                                .entry(col.clone())
                                .or_default()
                                .push((token.clone(), r.get()));
                            token
                        }
                    }
                }
            });
        }
        rec.push(ds.labels()[i].to_string());
        w.write_record(&rec)?;
    }
    map.validate()?;
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok((String::from_utf8(bytes).expect("csv output is UTF-8"), map))
}

/// 0/1 dump of the augmented columns with the label last.
pub fn matrix_to_csv(x: &AugmentedMatrix, labels: &[u8], label: &str) -> Result<String, Error> {
    let mut out = header_tokens(x.kinds()).join(",");
    out.push(',');
    out.push_str(label);
    out.push('\n');
    for (i, row) in x.dense_rows().iter().enumerate() {
        for b in row {
            out.push(if *b { '1' } else { '0' });
            out.push(',');
        }
        out.push_str(&labels[i].to_string());
        out.push('\n');
    }
    Ok(out)
}
