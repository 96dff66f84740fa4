//! Time-series containers and stationarity transforms.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};

/// A synchronous multivariate series: rows are time points, columns are series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    values: DMatrix<f64>,
    names: Vec<String>,
    transform_log: Vec<TransformRecord>,
}

impl TimeSeriesPanel {
    pub fn new(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::InvalidData("panel must have at least one row".into()));
        }
        if values.ncols() == 0 {
            return Err(Error::InvalidData("panel must have at least one series".into()));
        }
        if names.len() != values.ncols() {
            return Err(mismatch(format!(
                "{} names for {} series",
                names.len(),
                values.ncols()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidData(format!("duplicate series name `{name}`")));
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::Cell {
                row: r,
                column: names[c].clone(),
                message: "missing or non-finite value".into(),
            });
        }
        Ok(Self {
            values,
            names,
            transform_log: Vec::new(),
        })
    }

    /// Panel with generated names `y1..yK`.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|i| format!("y{i}")).collect();
        Self::new(values, names)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(mismatch("ragged rows"));
        }
        let values = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
        Self::from_values(values)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn transform_log(&self) -> &[TransformRecord] {
        &self.transform_log
    }

    /// Number of time points.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Number of series.
    pub fn n_series(&self) -> usize {
        self.values.ncols()
    }

    pub fn series(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    /// Contiguous time slice `[start, end)`, keeping names and transform history.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(invalid(format!(
                "row range {start}..{end} invalid for panel of length {}",
                self.len()
            )));
        }
        Ok(Self {
            values: self.values.rows(start, end - start).into_owned(),
            names: self.names.clone(),
            transform_log: self.transform_log.clone(),
        })
    }

    /// Stacks `other` below `self`; series names must agree.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.names != other.names {
            return Err(mismatch("cannot concatenate panels with different series"));
        }
        let (n1, n2, k) = (self.len(), other.len(), self.n_series());
        let values = DMatrix::from_fn(n1 + n2, k, |i, j| {
            if i < n1 {
                self.values[(i, j)]
            } else {
                other.values[(i - n1, j)]
            }
        });
        Ok(Self {
            values,
            names: self.names.clone(),
            transform_log: self.transform_log.clone(),
        })
    }

    fn column_indices(&self, series: Option<&[String]>) -> Result<Vec<usize>> {
        match series {
            None => Ok((0..self.n_series()).collect()),
            Some(list) => list
                .iter()
                .map(|name| {
                    self.names
                        .iter()
                        .position(|n| n == name)
                        .ok_or_else(|| Error::MissingColumn(name.clone()))
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Difference,
    LogDifference,
    LogYoyGrowth,
    Zscore,
}

impl TransformKind {
    fn shrinks(self) -> bool {
        !matches!(self, TransformKind::Zscore)
    }

    fn is_log(self) -> bool {
        matches!(self, TransformKind::LogDifference | TransformKind::LogYoyGrowth)
    }
}

/// Per-series location/scale used by the z-score transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    /// Lag used by the differencing kinds; ignored by `zscore`.
    #[serde(default = "default_period")]
    pub period: usize,
    /// Frozen z-score statistics, one per transformed series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<Vec<SeriesStats>>,
}

fn default_period() -> usize {
    1
}

impl TransformSpec {
    pub fn difference() -> Self {
        Self::with_period(TransformKind::Difference, 1)
    }

    pub fn log_difference() -> Self {
        Self::with_period(TransformKind::LogDifference, 1)
    }

    pub fn log_yoy_growth(period: usize) -> Self {
        Self::with_period(TransformKind::LogYoyGrowth, period)
    }

    pub fn zscore() -> Self {
        Self::with_period(TransformKind::Zscore, 1)
    }

    pub fn zscore_with(stats: Vec<SeriesStats>) -> Self {
        Self {
            kind: TransformKind::Zscore,
            period: 1,
            stats: Some(stats),
        }
    }

    pub fn with_period(kind: TransformKind, period: usize) -> Self {
        Self {
            kind,
            period,
            stats: None,
        }
    }

    /// Rows removed from the front of the panel.
    pub fn shrinkage(&self) -> usize {
        if self.kind.shrinks() {
            self.period
        } else {
            0
        }
    }
}

/// A transform as it was actually applied: the spec (with any computed
/// statistics frozen in) and the series it touched (`None` = all).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub spec: TransformSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Vec<String>>,
}

/// Applies `spec` to every series.
pub fn apply_transform(panel: &TimeSeriesPanel, spec: &TransformSpec) -> Result<TimeSeriesPanel> {
    apply_transform_to(panel, spec, None)
}

/// Applies `spec` to the named series only. Untouched series are truncated
/// from the front so that all columns stay aligned in time.
pub fn apply_transform_to(
    panel: &TimeSeriesPanel,
    spec: &TransformSpec,
    series: Option<&[String]>,
) -> Result<TimeSeriesPanel> {
    if spec.period == 0 {
        return Err(invalid("transform period must be >= 1"));
    }
    let cols = panel.column_indices(series)?;
    let t = panel.len();
    let shrink = spec.shrinkage();
    if shrink >= t {
        return Err(invalid(format!(
            "period {} leaves no observations from a panel of length {t}",
            spec.period
        )));
    }
    let values = panel.values();
    let mut out = values.rows(shrink, t - shrink).into_owned();
    let mut resolved = spec.clone();

    match spec.kind {
        TransformKind::Difference | TransformKind::LogDifference | TransformKind::LogYoyGrowth => {
            let lag = spec.period;
            for &j in &cols {
                if spec.kind.is_log() {
                    if let Some(i) = (0..t).find(|&i| values[(i, j)] <= 0.0) {
                        return Err(Error::Cell {
                            row: i,
                            column: panel.names()[j].clone(),
                            message: format!(
                                "log transform requires positive values, got {}",
                                values[(i, j)]
                            ),
                        });
                    }
                }
                for i in lag..t {
                    let (cur, prev) = (values[(i, j)], values[(i - lag, j)]);
                    out[(i - lag, j)] = if spec.kind.is_log() {
                        (cur / prev).ln()
                    } else {
                        cur - prev
                    };
                }
            }
        }
        TransformKind::Zscore => {
            let stats = match &spec.stats {
                Some(s) => {
                    if s.len() != cols.len() {
                        return Err(mismatch(format!(
                            "{} z-score stats for {} series",
                            s.len(),
                            cols.len()
                        )));
                    }
                    s.clone()
                }
                None => cols
                    .iter()
                    .map(|&j| series_stats(values.column(j).iter().copied()))
                    .collect(),
            };
            for (s, &j) in stats.iter().zip(&cols) {
                if !(s.sd > 0.0) || !s.sd.is_finite() || !s.mean.is_finite() {
                    return Err(Error::InvalidData(format!(
                        "series `{}` has zero or invalid standard deviation",
                        panel.names()[j]
                    )));
                }
                for i in 0..t {
                    out[(i, j)] = (values[(i, j)] - s.mean) / s.sd;
                }
            }
            resolved.stats = Some(stats);
        }
    }

    let mut log = panel.transform_log().to_vec();
    log.push(TransformRecord {
        spec: resolved,
        series: series.map(<[String]>::to_vec),
    });
    Ok(TimeSeriesPanel {
        values: out,
        names: panel.names().to_vec(),
        transform_log: log,
    })
}

/// Mean and population standard deviation.
pub fn series_stats(values: impl Iterator<Item = f64> + Clone) -> SeriesStats {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    SeriesStats {
        mean,
        sd: var.sqrt(),
    }
}

/// Chronological split: the final `n_holdout` rows form the holdout panel.
pub fn split_holdout(
    panel: &TimeSeriesPanel,
    n_holdout: usize,
) -> Result<(TimeSeriesPanel, TimeSeriesPanel)> {
    if n_holdout == 0 || n_holdout >= panel.len() {
        return Err(invalid(format!(
            "holdout of {n_holdout} rows needs 1 <= n < {}",
            panel.len()
        )));
    }
    let cut = panel.len() - n_holdout;
    Ok((panel.slice_rows(0, cut)?, panel.slice_rows(cut, panel.len())?))
}
