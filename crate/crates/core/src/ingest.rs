//! CSV panel loading and config-driven preprocessing.

use std::io::Read;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::panel::{apply_transform_to, TimeSeriesPanel, TransformRecord};

/// Sampling frequency used for gap checks on the date column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frequency {
    Daily,
    Quarterly,
    /// Order and uniqueness are still enforced; gaps are allowed.
    #[default]
    None,
}

fn default_delimiter() -> char {
    ','
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Date column; without one no date checks are made.
    #[serde(default)]
    pub date_column: Option<String>,
    /// Series to load, in this order. Empty means every non-date column.
    #[serde(default)]
    pub series: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub frequency: Frequency,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            date_column: None,
            series: Vec::new(),
            delimiter: default_delimiter(),
            frequency: Frequency::None,
        }
    }
}

/// A position on the time axis: a calendar day or a quarter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Stamp {
    Day(NaiveDate),
    Quarter(i32, u32),
}

impl Stamp {
    /// Accepts ISO dates (`2001-03-31`) and quarters (`2001Q1`, `2001-Q1`).
    fn parse(s: &str, freq: Frequency) -> Option<Self> {
        let s = s.trim();
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Some(match freq {
                Frequency::Quarterly => Stamp::Quarter(d.year(), d.month0() / 3 + 1),
                _ => Stamp::Day(d),
            });
        }
        let (y, q) = s.split_once(['Q', 'q'])?;
        let y: i32 = y.trim_end_matches('-').parse().ok()?;
        let q: u32 = q.parse().ok()?;
        (1..=4).contains(&q).then_some(Stamp::Quarter(y, q))
    }

    /// Steps from `self` to `next` at the declared frequency, if defined.
    fn steps_to(self, next: Self) -> Option<i64> {
        match (self, next) {
            (Stamp::Day(a), Stamp::Day(b)) => Some((b - a).num_days()),
            (Stamp::Quarter(y0, q0), Stamp::Quarter(y1, q1)) => {
                Some((y1 as i64 * 4 + q1 as i64) - (y0 as i64 * 4 + q0 as i64))
            }
            _ => None,
        }
    }
}

pub fn load_csv_panel(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<TimeSeriesPanel> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_csv_panel(file, schema)
}

/// Parses a panel from CSV text. Row numbers in errors are file line
/// numbers, with the header on line 1.
pub fn parse_csv_panel(reader: impl Read, schema: &CsvSchema) -> Result<TimeSeriesPanel> {
    if !schema.delimiter.is_ascii() {
        return Err(invalid(format!("delimiter {:?} is not ASCII", schema.delimiter)));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let date_idx = schema.date_column.as_deref().map(find).transpose()?;
    let names: Vec<String> = if schema.series.is_empty() {
        header
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != date_idx)
            .map(|(_, h)| h.clone())
            .collect()
    } else {
        schema.series.clone()
    };
    if names.is_empty() {
        return Err(Error::InvalidData("no series columns".into()));
    }
    let cols = names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;

    let mut data = Vec::new();
    let mut prev: Option<(Stamp, String)> = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        if let Some(d) = date_idx {
            let raw = cell(d);
            let column = header[d].clone();
            let stamp = Stamp::parse(raw, schema.frequency).ok_or_else(|| Error::Cell {
                row: line,
                column: column.clone(),
                message: format!("cannot parse date `{raw}`"),
            })?;
            if let Some((p, praw)) = &prev {
                let bad = |message: String| Error::Cell { row: line, column: column.clone(), message };
                let steps = p.steps_to(stamp);
                match steps {
                    Some(0) => return Err(bad(format!("duplicate date `{raw}`"))),
                    Some(s) if s < 0 => return Err(bad(format!("date `{raw}` precedes `{praw}`"))),
                    None => return Err(bad(format!("date `{raw}` mixes formats with `{praw}`"))),
                    Some(s) if s > 1 && schema.frequency != Frequency::None => {
                        return Err(bad(format!("gap of {} periods after `{praw}`", s - 1)))
                    }
                    _ => {}
                }
            }
            prev = Some((stamp, raw.to_string()));
        }
        for (&c, name) in cols.iter().zip(&names) {
            let raw = cell(c);
            let bad = |message: String| Error::Cell { row: line, column: name.clone(), message };
            if raw.is_empty() {
                return Err(bad("empty cell".into()));
            }
            let x: f64 = raw.parse().map_err(|_| bad(format!("not a number: `{raw}`")))?;
            if !x.is_finite() {
                return Err(bad(format!("non-finite value `{raw}`")));
            }
            data.push(x);
        }
    }
    if data.is_empty() {
        return Err(Error::InvalidData("no data rows".into()));
    }
    let k = names.len();
    let values = DMatrix::from_row_slice(data.len() / k, k, &data);
    TimeSeriesPanel::new(values, names)
}

/// Writes a panel as CSV: a header of series names, then one row per time
/// point. Values use the shortest representation that parses back exactly.
pub fn panel_to_csv(panel: &TimeSeriesPanel) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(panel.names())?;
    for row in panel.values().row_iter() {
        wtr.write_record(row.iter().map(|x| x.to_string()))?;
    }
    let bytes = wtr.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Applies `steps` in order; each step may target a subset of series.
/// Replaying a processed panel's transform log on the raw panel reproduces
/// it exactly, since fitted statistics are frozen into the log.
pub fn run_pipeline(panel: &TimeSeriesPanel, steps: &[TransformRecord]) -> Result<TimeSeriesPanel> {
    let mut out = panel.clone();
    for step in steps {
        out = apply_transform_to(&out, &step.spec, step.series.as_deref())?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::TransformSpec;
    use proptest::prelude::*;

    fn parse(text: &str, schema: &CsvSchema) -> Result<TimeSeriesPanel> {
        parse_csv_panel(text.as_bytes(), schema)
    }

    fn dated(freq: Frequency) -> CsvSchema {
        CsvSchema { date_column: Some("date".into()), frequency: freq, ..CsvSchema::default() }
    }

    #[test]
    fn well_formed_file() {
        let p = parse("date,a,b\n2020-01-01,1,2\n2020-01-02,3,4\n2020-01-03,5,6\n", &dated(Frequency::Daily)).unwrap();
        assert_eq!(p.values().shape(), (3, 2));
        assert_eq!(p.names(), ["a", "b"]);
        assert_eq!(p.values()[(2, 1)], 6.0);
    }

    #[test]
    fn blank_cell_names_row_and_column() {
        let err = parse("date,a,b\n2020-01-01,1,2\n2020-01-02,,4\n", &dated(Frequency::None)).unwrap_err();
        match err {
            Error::Cell { row, column, .. } => assert_eq!((row, column.as_str()), (3, "a")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn non_numeric_cell() {
        let err = parse("a,b\n1,x\n", &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::Cell { row: 2, ref column, .. } if column == "b"));
    }

    #[test]
    fn date_order_and_gaps() {
        let s = dated(Frequency::None);
        assert!(parse("date,a\n2020-01-02,1\n2020-01-01,2\n", &s).is_err());
        assert!(parse("date,a\n2020-01-01,1\n2020-01-01,2\n", &s).is_err());
        assert!(parse("date,a\n2020-01-01,1\n2020-01-05,2\n", &s).is_ok());
        assert!(parse("date,a\n2020-01-01,1\n2020-01-05,2\n", &dated(Frequency::Daily)).is_err());
    }

    #[test]
    fn quarterly_labels() {
        let s = dated(Frequency::Quarterly);
        assert!(parse("date,a\n2019Q4,1\n2020-Q1,2\n2020Q2,3\n", &s).is_ok());
        assert!(parse("date,a\n2019-12-31,1\n2020-03-31,2\n", &s).is_ok());
        assert!(parse("date,a\n2019Q4,1\n2020Q2,2\n", &s).is_err());
    }

    #[test]
    fn selected_series_and_delimiter() {
        let s = CsvSchema { series: vec!["c".into(), "a".into()], delimiter: ';', ..CsvSchema::default() };
        let p = parse("a;b;c\n1;2;3\n", &s).unwrap();
        assert_eq!(p.names(), ["c", "a"]);
        assert_eq!(p.values()[(0, 0)], 3.0);
        let s = CsvSchema { series: vec!["z".into()], ..CsvSchema::default() };
        assert!(matches!(parse("a\n1\n", &s), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn difference_then_zscore() {
        let p = TimeSeriesPanel::from_rows(&[vec![1.0], vec![3.0], vec![6.0]]).unwrap();
        let steps = [
            TransformRecord { spec: TransformSpec::difference(), series: None },
            TransformRecord { spec: TransformSpec::zscore(), series: None },
        ];
        let out = run_pipeline(&p, &steps).unwrap();
        // differenced pair (2, 3): mean 2.5, population sd 0.5
        assert_eq!(out.series(0), vec![-1.0, 1.0]);
        assert_eq!(out.transform_log().len(), 2);
    }

    #[test]
    fn empty_pipeline_is_identity_and_log_of_zero_fails() {
        let p = TimeSeriesPanel::from_rows(&[vec![1.0], vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(run_pipeline(&p, &[]).unwrap(), p);
        let step = TransformRecord { spec: TransformSpec::log_difference(), series: None };
        assert!(run_pipeline(&p, &[step]).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 2), 1..20)) {
            let p = TimeSeriesPanel::from_rows(&rows).unwrap();
            let back = parse(&panel_to_csv(&p).unwrap(), &CsvSchema::default()).unwrap();
            prop_assert_eq!(back.values(), p.values());
        }

        #[test]
        fn replay_is_bit_exact(
            rows in prop::collection::vec(prop::collection::vec(0.1f64..100.0, 3), 12..40),
            yoy in 1usize..4,
        ) {
            let raw = TimeSeriesPanel::from_rows(&rows).unwrap();
            let names = raw.names().to_vec();
            let steps = [
                TransformRecord { spec: TransformSpec::log_yoy_growth(yoy), series: Some(vec![names[0].clone()]) },
                TransformRecord { spec: TransformSpec::difference(), series: Some(vec![names[1].clone(), names[2].clone()]) },
                TransformRecord { spec: TransformSpec::zscore(), series: None },
            ];
            let out = run_pipeline(&raw, &steps).unwrap();
            let replay = run_pipeline(&raw, out.transform_log()).unwrap();
            prop_assert_eq!(replay.values(), out.values());
            prop_assert_eq!(replay.transform_log(), out.transform_log());
        }
    }
}
