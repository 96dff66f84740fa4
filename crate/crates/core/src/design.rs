//! Lagged regression design `Y = X W + E` and its sufficient statistics.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, mismatch, Result};
use crate::panel::TimeSeriesPanel;

/// Paired regression matrices for a VAR(p).
///
/// Row `i` of `x` holds, for each series `b` in turn, the values
/// `y[t-1, b], ..., y[t-p, b]` (most recent first), where `t = i + p` is the
/// panel time of the target row `y[i, ..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagDesign {
    pub y: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub p: usize,
    pub names: Vec<String>,
}

impl LagDesign {
    pub fn n_rows(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_series(&self) -> usize {
        self.y.ncols()
    }

    /// Columns of `x` holding the lags of series `b`.
    pub fn block(&self, b: usize) -> Range<usize> {
        block_range(b, self.p)
    }

    /// Design restricted to the given rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> LagDesign {
        LagDesign {
            y: self.y.select_rows(rows),
            x: self.x.select_rows(rows),
            p: self.p,
            names: self.names.clone(),
        }
    }

    pub fn gram(&self) -> DesignGram {
        DesignGram::from_design(self)
    }
}

pub fn block_range(b: usize, p: usize) -> Range<usize> {
    b * p..(b + 1) * p
}

pub fn build_lag_design(panel: &TimeSeriesPanel, p: usize) -> Result<LagDesign> {
    if p == 0 {
        return Err(invalid("lag order p must be >= 1"));
    }
    let t = panel.len();
    if t <= p {
        return Err(invalid(format!("need more than p={p} observations, got {t}")));
    }
    let k = panel.n_series();
    let v = panel.values();
    let rows = t - p;
    let y = v.rows(p, rows).into_owned();
    let x = DMatrix::from_fn(rows, k * p, |i, c| {
        let (b, lag) = (c / p, c % p + 1);
        v[(i + p - lag, b)]
    });
    Ok(LagDesign {
        y,
        x,
        p,
        names: panel.names().to_vec(),
    })
}

/// Design for forecasting every row of `holdout`, using the last `p` rows of
/// `train` as lag context.
pub fn holdout_design(
    train: &TimeSeriesPanel,
    holdout: &TimeSeriesPanel,
    p: usize,
) -> Result<LagDesign> {
    if train.len() < p {
        return Err(invalid(format!(
            "training panel has {} rows, need at least p={p} for context",
            train.len()
        )));
    }
    let context = train.slice_rows(train.len() - p, train.len())?;
    build_lag_design(&context.concat(holdout)?, p)
}

/// Cross-products of a design; every fitting routine works from these.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignGram {
    pub xtx: DMatrix<f64>,
    pub xty: DMatrix<f64>,
    pub yty: DMatrix<f64>,
    pub y_sum: DVector<f64>,
    pub n_rows: usize,
    pub p: usize,
}

impl DesignGram {
    pub fn from_design(d: &LagDesign) -> Self {
        Self {
            xtx: d.x.tr_mul(&d.x),
            xty: d.x.tr_mul(&d.y),
            yty: d.y.tr_mul(&d.y),
            y_sum: d.y.row_sum().transpose(),
            n_rows: d.n_rows(),
            p: d.p,
        }
    }

    pub fn n_series(&self) -> usize {
        self.yty.nrows()
    }

    pub fn check(&self) -> Result<()> {
        let (k, p) = (self.n_series(), self.p);
        if self.xtx.shape() != (k * p, k * p) || self.xty.shape() != (k * p, k) {
            return Err(mismatch("inconsistent gram matrices"));
        }
        Ok(())
    }
}
