//! Reference forecasters: training mean, random walk, univariate AR (ridge),
//! lasso-Granger and grouped-lasso-Granger.
//!
//! LG and GLG scale their penalty by the number of rows, i.e. they minimize
//! `1/(2n) ||y - Xw||^2 + lambda * pen(w)`, so one lambda grid is meaningful
//! across training sizes.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{block_range, DesignGram};
use crate::error::{invalid, mismatch, Error, Result};
use crate::model::{matrix_from_rows, matrix_rows, VarModel};
use crate::solvers::{group_lasso_gram, lasso_gram, ridge_solve_gram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Mean,
    Rw,
    Ar,
    Lg,
    Glg,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [Self::Mean, Self::Rw, Self::Ar, Self::Lg, Self::Glg];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Rw => "rw",
            Self::Ar => "ar",
            Self::Lg => "lg",
            Self::Glg => "glg",
        }
    }

    pub fn needs_lambda(self) -> bool {
        matches!(self, Self::Ar | Self::Lg | Self::Glg)
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub p: usize,
    /// Coefficients for ar/lg/glg.
    pub w: Option<DMatrix<f64>>,
    /// Per-series training means for `mean`.
    pub means: Option<DVector<f64>>,
    pub lambda: Option<f64>,
}

pub fn fit_baseline(kind: BaselineKind, gram: &DesignGram, lambda: Option<f64>) -> Result<BaselineModel> {
    fit_baseline_warm(kind, gram, lambda, None)
}

/// As [`fit_baseline`], with lg/glg coordinate descent started from `warm`
/// (typically the solution at a neighbouring lambda).
pub fn fit_baseline_warm(
    kind: BaselineKind,
    gram: &DesignGram,
    lambda: Option<f64>,
    warm: Option<&DMatrix<f64>>,
) -> Result<BaselineModel> {
    gram.check()?;
    let (k, p) = (gram.n_series(), gram.p);
    let lambda = if kind.needs_lambda() {
        match lambda {
            Some(l) if l >= 0.0 && l.is_finite() => Some(l),
            Some(l) => return Err(invalid(format!("lambda must be >= 0, got {l}"))),
            None => return Err(invalid(format!("{kind} requires lambda"))),
        }
    } else {
        None
    };
    let mut model = BaselineModel { kind, p, w: None, means: None, lambda };
    match kind {
        BaselineKind::Mean => {
            if gram.n_rows == 0 {
                return Err(invalid("no training rows"));
            }
            model.means = Some(&gram.y_sum / gram.n_rows as f64);
        }
        BaselineKind::Rw => {}
        BaselineKind::Ar => {
            let lam = lambda.unwrap_or_default();
            let mut w = DMatrix::zeros(k * p, k);
            for kk in 0..k {
                let r = block_range(kk, p);
                let a = gram.xtx.view((r.start, r.start), (p, p)).into_owned();
                let b = gram.xty.view((r.start, kk), (p, 1)).column(0).into_owned();
                let sol = ridge_solve_gram(a, &b, lam)?;
                w.view_mut((r.start, kk), (p, 1)).copy_from(&sol);
            }
            model.w = Some(w);
        }
        BaselineKind::Lg | BaselineKind::Glg => {
            let pen = lambda.unwrap_or_default() * gram.n_rows as f64;
            let groups: Vec<_> = (0..k).map(|b| block_range(b, p)).collect();
            if warm.is_some_and(|w| w.shape() != (k * p, k)) {
                return Err(mismatch("warm start has the wrong shape"));
            }
            let mut w = DMatrix::zeros(k * p, k);
            for kk in 0..k {
                let b = gram.xty.column(kk).into_owned();
                let w0 = warm.map(|w| w.column(kk).into_owned());
                let col = if kind == BaselineKind::Lg {
                    lasso_gram(&gram.xtx, &b, pen, w0.as_ref(), None)
                } else {
                    group_lasso_gram(&gram.xtx, &b, pen, &groups, w0.as_ref())
                };
                w.set_column(kk, &col);
            }
            model.w = Some(w);
        }
    }
    Ok(model)
}

impl BaselineModel {
    pub fn n_series(&self) -> Option<usize> {
        self.w
            .as_ref()
            .map(|w| w.ncols())
            .or_else(|| self.means.as_ref().map(|m| m.len()))
    }

    /// One-step forecast from a lag row laid out as in the design.
    pub fn forecast(&self, lag_row: &DVector<f64>) -> Result<DVector<f64>> {
        let p = self.p;
        if lag_row.len() % p != 0 {
            return Err(mismatch(format!("lag row of length {} is not a multiple of p={p}", lag_row.len())));
        }
        let k = lag_row.len() / p;
        if let Some(kk) = self.n_series() {
            if kk != k {
                return Err(mismatch(format!("lag row covers {k} series, model has {kk}")));
            }
        }
        Ok(match self.kind {
            BaselineKind::Mean => self.means.clone().unwrap_or_else(|| DVector::zeros(k)),
            BaselineKind::Rw => DVector::from_fn(k, |b, _| lag_row[b * p]),
            _ => self.w.as_ref().map_or_else(|| DVector::zeros(k), |w| w.tr_mul(lag_row)),
        })
    }

    /// Forecasts for every row of a lag matrix.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match (&self.w, self.kind) {
            (Some(w), _) => {
                if x.ncols() != w.nrows() {
                    return Err(mismatch("lag matrix width does not match W"));
                }
                Ok(x * w)
            }
            (None, BaselineKind::Mean) => {
                let m = self.means.as_ref().ok_or_else(|| invalid("mean model without means"))?;
                Ok(DMatrix::from_fn(x.nrows(), m.len(), |_, j| m[j]))
            }
            _ => {
                let k = x.ncols() / self.p;
                Ok(DMatrix::from_fn(x.nrows(), k, |t, b| x[(t, b * self.p)]))
            }
        }
    }

    pub fn as_var(&self, names: Vec<String>) -> Option<Result<VarModel>> {
        self.w.clone().map(|w| VarModel::new(w, self.p, names))
    }

    pub fn to_serializable(&self) -> SerializedBaseline {
        SerializedBaseline {
            kind: self.kind,
            p: self.p,
            w: self.w.as_ref().map(matrix_rows),
            means: self.means.as_ref().map(|m| m.iter().copied().collect()),
            lambda: self.lambda,
        }
    }

    pub fn from_serializable(s: &SerializedBaseline) -> Result<Self> {
        Ok(Self {
            kind: s.kind,
            p: s.p,
            w: s.w.as_deref().map(matrix_from_rows).transpose()?,
            means: s.means.as_ref().map(|m| DVector::from_vec(m.clone())),
            lambda: s.lambda,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerializedBaseline {
    pub kind: BaselineKind,
    pub p: usize,
    #[serde(default)]
    pub w: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub means: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda: Option<f64>,
}
