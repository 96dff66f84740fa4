//! Machinery shared by the structured fits: the reweighted ridge step for
//! `V`, block products `h[t, b, k] = <v_bk, x_tb>`, and the structured loss.
//!
//! The fits run on [`DesignGram`] cross-products, so the cost of an outer
//! iteration does not depend on the number of observations. The explicit
//! data-space constructions are exported as well for auditing.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{block_range, DesignGram, LagDesign};
use crate::error::{invalid, mismatch, Error, Result};
use crate::solvers::{ridge_solve_gram, PgdOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_outer: usize,
    /// Relative change of the penalized objective that ends the alternation.
    pub outer_tol: f64,
    pub pgd: PgdOptions,
    /// Keep the assembled `W` after every outer iteration.
    #[serde(skip)]
    pub record_history: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_outer: 200,
            outer_tol: 1e-6,
            pgd: PgdOptions::default(),
            record_history: false,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 || !(self.outer_tol > 0.0) {
            return Err(invalid("max_outer must be >= 1 and outer_tol > 0"));
        }
        self.pgd.validate()
    }
}

/// Quadratic pieces of task `k`'s loss as a function of the off-diagonal
/// structural weights `gamma[., k]`:
/// `loss_k = rr - 2 gamma' hr + gamma' hh gamma`, with entry `k` zeroed.
#[derive(Debug, Clone)]
pub(crate) struct TaskProducts {
    pub hh: DMatrix<f64>,
    pub hr: DVector<f64>,
    pub rr: f64,
}

impl TaskProducts {
    pub fn loss(&self, gamma_col: &DVector<f64>) -> f64 {
        self.rr - 2.0 * self.hr.dot(gamma_col) + (&self.hh * gamma_col).dot(gamma_col)
    }
}

pub(crate) fn task_products(gram: &DesignGram, v: &DMatrix<f64>) -> Vec<TaskProducts> {
    let (k_all, p) = (gram.n_series(), gram.p);
    (0..k_all)
        .map(|k| {
            let vk = v.column(k);
            let blocks: Vec<DVector<f64>> = (0..k_all)
                .map(|b| vk.rows(b * p, p).into_owned())
                .collect();
            let mut hh = DMatrix::zeros(k_all, k_all);
            for b in 0..k_all {
                let rb = block_range(b, p);
                for c in b..k_all {
                    let rc = block_range(c, p);
                    let xbc = gram.xtx.view((rb.start, rc.start), (p, p));
                    let val = (xbc * &blocks[c]).dot(&blocks[b]);
                    hh[(b, c)] = val;
                    hh[(c, b)] = val;
                }
            }
            let hy = DVector::from_fn(k_all, |b, _| {
                let rb = block_range(b, p);
                gram.xty.view((rb.start, k), (p, 1)).column(0).dot(&blocks[b])
            });
            // r_k = y_k - h_kk, so H_k' r_k = H_k' y_k - H_k' h_kk.
            let mut hr = &hy - hh.column(k);
            let rr = gram.yty[(k, k)] - 2.0 * hy[k] + hh[(k, k)];
            hr[k] = 0.0;
            hh.row_mut(k).fill(0.0);
            hh.column_mut(k).fill(0.0);
            TaskProducts { hh, hr, rr }
        })
        .collect()
}

/// V step: ridge-solve every column of `V` on inputs reweighted by `gamma`.
pub(crate) fn solve_v(gram: &DesignGram, gamma: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let (k_all, p) = (gram.n_series(), gram.p);
    let d = k_all * p;
    let mut v = DMatrix::zeros(d, k_all);
    for k in 0..k_all {
        let scale = DVector::from_fn(d, |i, _| gamma[(i / p, k)]);
        let ztz = DMatrix::from_fn(d, d, |i, j| scale[i] * scale[j] * gram.xtx[(i, j)]);
        let zty = gram.xty.column(k).component_mul(&scale);
        let col = ridge_solve_gram(ztz, &zty, lambda)?;
        v.set_column(k, &col);
    }
    Ok(v)
}

pub(crate) fn penalized_objective(
    products: &[TaskProducts],
    gamma: &DMatrix<f64>,
    v: &DMatrix<f64>,
    lambda: f64,
) -> f64 {
    let loss: f64 = products
        .iter()
        .enumerate()
        .map(|(k, tp)| tp.loss(&gamma.column(k).into_owned()))
        .sum();
    loss + lambda * v.norm_squared()
}

pub(crate) fn check_finite(obj: f64) -> Result<()> {
    if obj.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(
            "penalized objective (check the scaling of the data)".into(),
        ))
    }
}

pub(crate) fn check_lambda_kappa(lambda: f64, kappa: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(invalid(format!("kappa must be positive, got {kappa}")));
    }
    Ok(())
}

pub(crate) fn relative_change(prev: f64, cur: f64) -> f64 {
    if prev == cur {
        0.0
    } else {
        (prev - cur).abs() / prev.abs().max(f64::MIN_POSITIVE)
    }
}

/// Largest violation of `{x >= 0, sum(x) = total}`.
pub fn simplex_violation(x: impl Iterator<Item = f64> + Clone, total: f64) -> f64 {
    let neg = x.clone().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
    let sum: f64 = x.sum();
    neg.max((sum - total).abs())
}

/// Structured loss `sum_t sum_k (y_tk - sum_b gamma_bk <v_bk, x_tb>)^2`
/// evaluated directly on the design.
pub fn structured_loss(design: &LagDesign, gamma: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<f64> {
    let (k_all, p) = (design.n_series(), design.p);
    if gamma.shape() != (k_all, k_all) || v.shape() != (k_all * p, k_all) {
        return Err(mismatch("Gamma/V shapes do not match the design"));
    }
    let mut total = 0.0;
    for t in 0..design.n_rows() {
        for k in 0..k_all {
            let mut pred = 0.0;
            for b in 0..k_all {
                let r = block_range(b, p);
                let h: f64 = r.map(|c| v[(c, k)] * design.x[(t, c)]).sum();
                pred += gamma[(b, k)] * h;
            }
            total += (design.y[(t, k)] - pred).powi(2);
        }
    }
    Ok(total)
}

/// Plain squared-error loss `sum ||Y - X W||^2`.
pub fn squared_loss(design: &LagDesign, w: &DMatrix<f64>) -> Result<f64> {
    if w.shape() != (design.x.ncols(), design.n_series()) {
        return Err(mismatch("W shape does not match the design"));
    }
    Ok((&design.y - &design.x * w).norm_squared())
}

/// Explicit block-product matrices: `H_k` is `T' x K` with entries
/// `<v_bk, x_tb>` and column `k` zeroed; `R` holds `y_tk - h_tkk`.
pub fn block_products(design: &LagDesign, v: &DMatrix<f64>) -> (Vec<DMatrix<f64>>, DMatrix<f64>) {
    let (n, k_all, p) = (design.n_rows(), design.n_series(), design.p);
    let mut resid = DMatrix::zeros(n, k_all);
    let hs = (0..k_all)
        .map(|k| {
            let mut h = DMatrix::from_fn(n, k_all, |t, b| {
                block_range(b, p).map(|c| v[(c, k)] * design.x[(t, c)]).sum::<f64>()
            });
            for t in 0..n {
                resid[(t, k)] = design.y[(t, k)] - h[(t, k)];
            }
            h.column_mut(k).fill(0.0);
            h
        })
        .collect();
    (hs, resid)
}

/// Stacks `H_1..H_K` vertically into a `K T' x K` matrix.
pub fn stack_blocks(hs: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = hs.first().map_or(0, DMatrix::nrows);
    let k = hs.first().map_or(0, DMatrix::ncols);
    DMatrix::from_fn(n * hs.len(), k, |i, j| hs[i / n][(i % n, j)])
}

/// `vec(R)`: columns of `R` stacked.
pub fn vec_columns(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::build_lag_design;
    use crate::model::{assemble_w, gamma_from_alpha};
    use crate::panel::TimeSeriesPanel;

    fn toy_design() -> LagDesign {
        let vals = DMatrix::from_fn(14, 3, |i, j| ((i * 7 + j * 3) as f64 * 0.61).sin() + j as f64 * 0.1);
        build_lag_design(&TimeSeriesPanel::from_values(vals).unwrap(), 2).unwrap()
    }

    #[test]
    fn gram_products_match_explicit_construction() {
        let d = toy_design();
        let v = DMatrix::from_fn(6, 3, |i, j| ((i + 2 * j) as f64 * 0.7).cos());
        let products = task_products(&d.gram(), &v);
        let (hs, r) = block_products(&d, &v);
        for k in 0..3 {
            let hh = hs[k].tr_mul(&hs[k]);
            let hr = hs[k].tr_mul(&r.column(k).into_owned());
            assert!((&hh - &products[k].hh).amax() < 1e-10);
            assert!((&hr - &products[k].hr).amax() < 1e-10);
            assert!((r.column(k).norm_squared() - products[k].rr).abs() < 1e-10);
        }
    }

    #[test]
    fn structured_loss_matches_assembled_loss() {
        let d = toy_design();
        let v = DMatrix::from_fn(6, 3, |i, j| 0.3 * ((i * j) as f64).sin() + 0.1);
        let gamma = gamma_from_alpha(&DVector::from_vec(vec![0.2, 0.5, 0.3]), 1.0);
        let l3 = structured_loss(&d, &gamma, &v).unwrap();
        let l2 = squared_loss(&d, &assemble_w(&gamma, &v, 2).unwrap()).unwrap();
        assert!((l3 - l2).abs() <= 1e-10 * l2);
        let products = task_products(&d.gram(), &v);
        let gram_loss = penalized_objective(&products, &gamma, &v, 0.0);
        assert!((gram_loss - l2).abs() <= 1e-9 * l2);
    }

    #[test]
    fn violation_measure() {
        assert_eq!(simplex_violation([0.5, 0.5].into_iter(), 1.0), 0.0);
        assert!((simplex_violation([0.7, -0.1].into_iter(), 1.0) - 0.4).abs() < 1e-15);
    }
}
