//! VAR parameter matrices and the structural decomposition `W = Gamma * V`
//! applied block-wise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::block_range;
use crate::error::{mismatch, Result};

/// `Kp x K` VAR coefficients; column `k` is the forecasting model of series `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    pub w: DMatrix<f64>,
    pub p: usize,
    pub names: Vec<String>,
}

impl VarModel {
    pub fn new(w: DMatrix<f64>, p: usize, names: Vec<String>) -> Result<Self> {
        let k = names.len();
        if p == 0 || w.shape() != (k * p, k) {
            return Err(mismatch(format!(
                "W is {}x{}, expected {}x{k} for p={p}",
                w.nrows(),
                w.ncols(),
                k * p
            )));
        }
        Ok(Self { w, p, names })
    }

    pub fn zeros(k: usize, p: usize) -> Self {
        Self {
            w: DMatrix::zeros(k * p, k),
            p,
            names: (1..=k).map(|i| format!("y{i}")).collect(),
        }
    }

    pub fn n_series(&self) -> usize {
        self.w.ncols()
    }

    /// Block `(b, k)`: coefficients of the `p` lags of series `b` in model `k`.
    pub fn block(&self, b: usize, k: usize) -> DVector<f64> {
        let r = block_range(b, self.p);
        self.w.view((r.start, k), (self.p, 1)).column(0).into_owned()
    }

    /// Lag coefficient matrices `A_1..A_p` with `y_t = sum_l A_l y_{t-l} + e_t`.
    pub fn lag_matrices(&self) -> Vec<DMatrix<f64>> {
        let (k, p) = (self.n_series(), self.p);
        (0..p)
            .map(|l| DMatrix::from_fn(k, k, |row, b| self.w[(b * p + l, row)]))
            .collect()
    }

    pub fn to_serializable(&self) -> SerializedVar {
        SerializedVar {
            p: self.p,
            names: self.names.clone(),
            w: matrix_rows(&self.w),
        }
    }

    pub fn from_serializable(s: &SerializedVar) -> Result<Self> {
        Self::new(matrix_from_rows(&s.w)?, s.p, s.names.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerializedVar {
    pub p: usize,
    pub names: Vec<String>,
    pub w: Vec<Vec<f64>>,
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(mismatch("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// `Gamma = A - diag(A) + tau I` with every column of `A` equal to `alpha_bar`.
pub fn gamma_from_alpha(alpha_bar: &DVector<f64>, tau: f64) -> DMatrix<f64> {
    let k = alpha_bar.len();
    DMatrix::from_fn(k, k, |b, c| if b == c { tau } else { alpha_bar[b] })
}

/// `Gamma = A - diag(A) + I` for a general structural matrix `A`.
pub fn gamma_from_structure(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = a.clone();
    g.fill_diagonal(1.0);
    g
}

/// Scales block `(b, k)` of `V` by `gamma[b, k]`.
pub fn assemble_w(gamma: &DMatrix<f64>, v: &DMatrix<f64>, p: usize) -> Result<DMatrix<f64>> {
    let k = gamma.ncols();
    if !gamma.is_square() || v.shape() != (k * p, k) {
        return Err(mismatch(format!(
            "Gamma {}x{} incompatible with V {}x{} at p={p}",
            gamma.nrows(),
            gamma.ncols(),
            v.nrows(),
            v.ncols()
        )));
    }
    Ok(DMatrix::from_fn(k * p, k, |row, col| gamma[(row / p, col)] * v[(row, col)]))
}
