//! Loaders for the four provider formats and the compact load-profile store.
//!
//! Every loader reads a delimited text file with a header row, maps columns
//! to roles through a declarative schema, and partitions data rows into
//! accepted records and rejections. A file whose rejected share exceeds the
//! schema's threshold fails as a whole.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod ev;
mod load;
mod pv;
pub mod store;
mod weather;

pub use ev::{load_ev_dataset, EvSchema, RawSessionRecord};
pub use load::{load_fluvius, EnergyUnits, FluviusLoad, FluviusSchema, ProfileRejection, TypeSource};
pub use pv::{load_pv_dataset, PvSchema, RawPVRecord, RowFilter};
pub use store::{compact_store, read_store, StoreManifest};
pub use weather::{load_weather, WeatherRecord, WeatherSchema};

/// Settings shared by every delimited-text schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextFormat {
    pub delimiter: char,
    /// Numbers use `,` as the decimal separator.
    pub decimal_comma: bool,
    /// Extra `chrono` formats tried before the built-in list.
    pub datetime_formats: Vec<String>,
    /// Abort when more than this share of data rows is rejected.
    pub max_reject_fraction: f64,
}

impl Default for TextFormat {
    fn default() -> Self {
        TextFormat {
            delimiter: ',',
            decimal_comma: false,
            datetime_formats: Vec::new(),
            max_reject_fraction: 0.10,
        }
    }
}

impl TextFormat {
    pub fn with_delimiter(delimiter: char) -> Self {
        TextFormat {
            delimiter,
            ..Default::default()
        }
    }
}

/// A data row that was not accepted. `row` is the 1-based data-row number
/// (the header is row 0).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub row: usize,
    pub reason: String,
}

/// Accepted records plus everything that did not make it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoadReport<T> {
    pub records: Vec<T>,
    pub rejected: Vec<Rejection>,
    /// Rows skipped by a schema row filter (neither accepted nor rejected).
    pub filtered: usize,
    pub input_rows: usize,
    pub warnings: Vec<String>,
}

pub(crate) struct Delimited {
    path: std::path::PathBuf,
    reader: csv::Reader<File>,
    headers: Vec<String>,
}

impl Delimited {
    pub(crate) fn open(path: &Path, format: &TextFormat) -> Result<Self> {
        if !format.delimiter.is_ascii() {
            return Err(Error::Config(format!(
                "delimiter {:?} is not a single byte",
                format.delimiter
            )));
        }
        let file = File::open(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(path.display().to_string())
            } else {
                Error::io(path, e)
            }
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(format.delimiter as u8)
            .comment(Some(b'#'))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}').to_string())
            .collect();
        Ok(Delimited {
            path: path.to_path_buf(),
            reader,
            headers,
        })
    }

    /// Column indices for the given names; every name must be present.
    pub(crate) fn require(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut missing = Vec::new();
        let idx = names
            .iter()
            .map(|n| match self.position(n) {
                Some(i) => i,
                None => {
                    missing.push(n.to_string());
                    usize::MAX
                }
            })
            .collect();
        if missing.is_empty() {
            Ok(idx)
        } else {
            Err(Error::HeaderMismatch {
                path: self.path.clone(),
                missing,
            })
        }
    }

    /// Index of an optional column: `None` in the schema means unused; a
    /// configured but absent name is a header mismatch.
    /// Index of an optional column; a column absent from the header reads
    /// as empty.
    pub(crate) fn optional(&self, name: Option<&str>) -> Result<Option<usize>> {
        Ok(name.and_then(|n| self.position(n)))
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Calls `f(row_number, record)` for every data row.
    pub(crate) fn for_each_row(
        &mut self,
        mut f: impl FnMut(usize, &csv::StringRecord) -> Result<()>,
    ) -> Result<usize> {
        let mut record = csv::StringRecord::new();
        let mut row = 0;
        loop {
            match self.reader.read_record(&mut record) {
                Ok(true) => {
                    row += 1;
                    f(row, &record)?;
                }
                Ok(false) => return Ok(row),
                Err(e) => return Err(csv_error(&self.path, e)),
            }
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Csv {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

pub(crate) fn field(record: &csv::StringRecord, idx: usize) -> &str {
    record.get(idx).unwrap_or("")
}

/// Parses a number, or `None` for empty / unparsable text.
pub(crate) fn parse_number(raw: &str, decimal_comma: bool) -> Option<f64> {
    let s = raw.trim();
    if s.is_empty() {
        return None;
    }
    let v = if decimal_comma {
        s.replace('.', "").replace(',', ".").parse::<f64>().ok()?
    } else {
        s.parse::<f64>().ok()?
    };
    v.is_finite().then_some(v)
}

/// Number of digits after the decimal separator in `raw`.
pub(crate) fn decimal_places(raw: &str, decimal_comma: bool) -> u32 {
    let sep = if decimal_comma { ',' } else { '.' };
    let s = raw.trim();
    let mantissa = s.split(['e', 'E']).next().unwrap_or(s);
    mantissa
        .split_once(sep)
        .map(|(_, frac)| frac.len() as u32)
        .unwrap_or(0)
}

/// Required numeric field: parsed value or a rejection reason.
pub(crate) fn required_number(
    record: &csv::StringRecord,
    idx: usize,
    role: &str,
    decimal_comma: bool,
) -> std::result::Result<f64, String> {
    let raw = field(record, idx);
    parse_number(raw, decimal_comma).ok_or_else(|| format!("unparsable {role} {raw:?}"))
}

/// Optional numeric field: empty is `None`, garbage is a rejection reason.
pub(crate) fn optional_number(
    record: &csv::StringRecord,
    idx: Option<usize>,
    role: &str,
    decimal_comma: bool,
) -> std::result::Result<Option<f64>, String> {
    let Some(idx) = idx else { return Ok(None) };
    let raw = field(record, idx);
    if raw.trim().is_empty() {
        return Ok(None);
    }
    parse_number(raw, decimal_comma)
        .map(Some)
        .ok_or_else(|| format!("unparsable {role} {raw:?}"))
}

pub(crate) fn check_rejections(
    rejected: &[Rejection],
    total: usize,
    threshold: f64,
) -> Result<()> {
    if total > 0 && rejected.len() as f64 > threshold * total as f64 {
        let first = rejected
            .first()
            .map(|r| format!("row {}: {}", r.row, r.reason))
            .unwrap_or_default();
        return Err(Error::TooManyRejections {
            rejected: rejected.len(),
            total,
            threshold,
            first,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_and_decimals() {
        assert_eq!(parse_number(" 2.5 ", false), Some(2.5));
        assert_eq!(parse_number("2,5", true), Some(2.5));
        assert_eq!(parse_number("1.234,5", true), Some(1234.5));
        assert_eq!(parse_number("", false), None);
        assert_eq!(parse_number("abc", false), None);
        assert_eq!(parse_number("inf", false), None);
        assert_eq!(decimal_places("0.125", false), 3);
        assert_eq!(decimal_places("12", false), 0);
        assert_eq!(decimal_places("0,50", true), 2);
        assert_eq!(decimal_places("1.5e-3", false), 1);
    }

    #[test]
    fn rejection_threshold_is_strict() {
        let rej = |n| {
            (0..n)
                .map(|i| Rejection {
                    row: i + 1,
                    reason: "x".into(),
                })
                .collect::<Vec<_>>()
        };
        assert!(check_rejections(&rej(10), 100, 0.1).is_ok());
        let err = check_rejections(&rej(11), 100, 0.1).unwrap_err();
        assert!(matches!(err, Error::TooManyRejections { rejected: 11, .. }));
    }
}
