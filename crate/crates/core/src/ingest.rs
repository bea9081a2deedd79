//! Study files.
//!
//! CSV needs a header. The first three columns are always `label`,
//! `measure` (`MD` or `OR`) and `input_kind`; the remaining columns are any
//! subset of the per-kind fields below, in any order. Cells belonging to a
//! kind other than the row's own must be empty.
//!
//! | input_kind | fields                              |
//! |------------|-------------------------------------|
//! | `point`    | `y`, `se`                           |
//! | `ci`       | `lo`, `hi`, optional `level`        |
//! | `arms`     | `n1,mean1,sd1,n2,mean2,sd2` (MD)    |
//! | `counts`   | `a,b,c,d` (OR)                      |
//!
//! JSON is an array of objects with the same field names; numbers may be
//! given as JSON numbers or numeric strings.

use std::collections::BTreeMap;
use std::io::Read;
use std::str::FromStr;

use serde_json::Value;

use crate::effect::{
    study_from_2x2, study_from_ci, study_from_estimate_se, study_from_two_arm_continuous,
    ConfidenceInterval, EffectMeasure, StudyEffect,
};
use crate::error::{Error, Result};
use crate::stats::Probability;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyFormat {
    Csv,
    Json,
}

impl StudyFormat {
    /// Guesses the format from a file extension; anything but `.json` is CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => StudyFormat::Json,
            _ => StudyFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InputKind {
    Point,
    Ci,
    Arms,
    Counts,
}

impl InputKind {
    fn fields(self) -> &'static [&'static str] {
        match self {
            InputKind::Point => &["y", "se"],
            InputKind::Ci => &["lo", "hi", "level"],
            InputKind::Arms => &["n1", "mean1", "sd1", "n2", "mean2", "sd2"],
            InputKind::Counts => &["a", "b", "c", "d"],
        }
    }

    const ALL: [InputKind; 4] = [InputKind::Point, InputKind::Ci, InputKind::Arms, InputKind::Counts];
}

impl FromStr for InputKind {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.trim() {
            "point" => Ok(InputKind::Point),
            "ci" => Ok(InputKind::Ci),
            "arms" => Ok(InputKind::Arms),
            "counts" => Ok(InputKind::Counts),
            _ => Err(()),
        }
    }
}

const FIXED_COLUMNS: [&str; 3] = ["label", "measure", "input_kind"];

fn is_known_column(name: &str) -> bool {
    FIXED_COLUMNS.contains(&name) || InputKind::ALL.iter().any(|k| k.fields().contains(&name))
}

#[derive(Debug, Clone)]
enum Cell {
    Text(String),
    Num(f64),
}

/// One source row before validation.
struct RawRow {
    row: usize,
    cells: BTreeMap<String, Cell>,
}

impl RawRow {
    fn text(&self, column: &str) -> Option<String> {
        match self.cells.get(column) {
            Some(Cell::Text(s)) if !s.trim().is_empty() => Some(s.trim().to_string()),
            Some(Cell::Num(x)) => Some(x.to_string()),
            _ => None,
        }
    }

    fn is_filled(&self, column: &str) -> bool {
        self.text(column).is_some()
    }

    fn required_text(&self, column: &str) -> Result<String> {
        self.text(column)
            .ok_or_else(|| Error::parse(self.row, column, format!("missing value for {column}")))
    }

    fn real(&self, column: &str) -> Result<f64> {
        let value = match self.cells.get(column) {
            Some(Cell::Num(x)) => *x,
            _ => {
                let s = self.required_text(column)?;
                s.parse::<f64>().map_err(|_| {
                    Error::parse(self.row, column, format!("{column} is not a number: {s:?}"))
                })?
            }
        };
        if !value.is_finite() {
            return Err(Error::parse(self.row, column, format!("{column} must be finite")));
        }
        Ok(value)
    }

    fn count(&self, column: &str) -> Result<u64> {
        let x = self.real(column)?;
        if x < 0.0 {
            return Err(Error::parse(self.row, column, format!("{column} must be >= 0")));
        }
        if x.fract() != 0.0 || x > u32::MAX as f64 {
            return Err(Error::parse(
                self.row,
                column,
                format!("{column} must be a whole number, got {x}"),
            ));
        }
        Ok(x as u64)
    }

    fn into_study(self, default_level: Probability) -> Result<StudyEffect> {
        let label = self.text("label").unwrap_or_default();
        let measure_text = self.required_text("measure")?;
        let measure = measure_text.parse::<EffectMeasure>().map_err(|_| {
            Error::parse(
                self.row,
                "measure",
                format!("unknown measure {measure_text:?} (expected MD or OR)"),
            )
        })?;
        let kind_text = self.required_text("input_kind")?;
        let kind = kind_text.parse::<InputKind>().map_err(|_| {
            Error::parse(
                self.row,
                "input_kind",
                format!("unknown input_kind {kind_text:?} (expected point, ci, arms or counts)"),
            )
        })?;

        for other in InputKind::ALL.iter().filter(|k| **k != kind) {
            for column in other.fields() {
                if self.is_filled(column) {
                    return Err(Error::parse(
                        self.row,
                        column,
                        format!("column {column} conflicts with input_kind {kind_text}"),
                    ));
                }
            }
        }

        let row = self.row;
        let wrap = |column: &'static str| move |e: Error| attach_row(e, row, column);

        match kind {
            InputKind::Point => {
                let y = self.real("y")?;
                let se = self.real("se")?;
                if se <= 0.0 {
                    return Err(Error::parse(row, "se", "se must be > 0"));
                }
                study_from_estimate_se(label, y, se, measure).map_err(wrap("se"))
            }
            InputKind::Ci => {
                let lo = self.real("lo")?;
                let hi = self.real("hi")?;
                let level = if self.is_filled("level") {
                    let l = self.real("level")?;
                    Probability::open(l).map_err(wrap("level"))?
                } else {
                    default_level
                };
                let ci = ConfidenceInterval::new(lo, hi, level).map_err(wrap("hi"))?;
                study_from_ci(label, ci, measure).map_err(wrap("lo"))
            }
            InputKind::Arms => {
                if measure != EffectMeasure::MeanDifference {
                    return Err(Error::parse(row, "measure", "arms input requires measure MD"));
                }
                let n1 = self.count("n1")?;
                let mean1 = self.real("mean1")?;
                let sd1 = self.real("sd1")?;
                let n2 = self.count("n2")?;
                let mean2 = self.real("mean2")?;
                let sd2 = self.real("sd2")?;
                study_from_two_arm_continuous(label, n1, mean1, sd1, n2, mean2, sd2)
                    .map_err(wrap("arms"))
            }
            InputKind::Counts => {
                if measure != EffectMeasure::OddsRatio {
                    return Err(Error::parse(row, "measure", "counts input requires measure OR"));
                }
                let a = self.count("a")?;
                let b = self.count("b")?;
                let c = self.count("c")?;
                let d = self.count("d")?;
                study_from_2x2(label, a, b, c, d).map_err(wrap("counts"))
            }
        }
    }
}

fn attach_row(e: Error, row: usize, column: &str) -> Error {
    match e {
        Error::Domain(msg) => Error::parse(row, column, msg),
        other => other,
    }
}

/// Parses a study file. Every row becomes one [`StudyEffect`], in source
/// order. `default_level` applies to `ci` rows without a `level` cell.
pub fn parse_studies<R: Read>(
    source: R,
    format: StudyFormat,
    default_level: Probability,
) -> Result<Vec<StudyEffect>> {
    let rows = match format {
        StudyFormat::Csv => read_csv_rows(source)?,
        StudyFormat::Json => read_json_rows(source)?,
    };
    rows.into_iter().map(|r| r.into_study(default_level)).collect()
}

fn read_csv_rows<R: Read>(source: R) -> Result<Vec<RawRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Format(format!("cannot read CSV header: {e}")))?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_string())
        .collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Format("CSV header is missing".into()));
    }
    if headers.len() < 3 || headers[..3] != FIXED_COLUMNS {
        return Err(Error::Format(format!(
            "CSV header must start with label,measure,input_kind (got {})",
            headers.join(",")
        )));
    }
    for (i, h) in headers.iter().enumerate() {
        if !is_known_column(h) {
            return Err(Error::Format(format!("unknown column {h:?}")));
        }
        if headers[..i].contains(h) {
            return Err(Error::Format(format!("duplicate column {h:?}")));
        }
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, "", format!("malformed CSV record: {e}"))
        })?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(rows.len() + 2);
        let cells = headers
            .iter()
            .cloned()
            .zip(record.iter().map(|s| Cell::Text(s.to_string())))
            .collect();
        rows.push(RawRow { row, cells });
    }
    Ok(rows)
}

fn read_json_rows<R: Read>(source: R) -> Result<Vec<RawRow>> {
    let value: Value = serde_json::from_reader(source)
        .map_err(|e| Error::Format(format!("invalid JSON: {e}")))?;
    let Value::Array(items) = value else {
        return Err(Error::Format("study JSON must be an array of objects".into()));
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            let row = i + 1;
            let Value::Object(map) = item else {
                return Err(Error::parse(row, "", "element is not an object"));
            };
            let mut cells = BTreeMap::new();
            for (key, value) in map {
                if !is_known_column(&key) {
                    return Err(Error::parse(row, &key, format!("unknown field {key:?}")));
                }
                let cell = match value {
                    Value::Null => Cell::Text(String::new()),
                    Value::String(s) => Cell::Text(s),
                    Value::Number(n) => Cell::Num(n.as_f64().ok_or_else(|| {
                        Error::parse(row, &key, format!("{key} is not representable as a number"))
                    })?),
                    other => {
                        return Err(Error::parse(
                            row,
                            &key,
                            format!("{key} must be a number or string, got {other}"),
                        ))
                    }
                };
                cells.insert(key, cell);
            }
            Ok(RawRow { row, cells })
        })
        .collect()
}
