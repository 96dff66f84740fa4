//! Lasso and group lasso by (block) coordinate descent, using the
//! `1/2 ||y - Xw||^2` loss convention.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, mismatch, Result};

/// Sweep budget; ill-posed problems (more inputs than rows, tiny penalty)
/// can crawl along flat valleys for much longer without changing fits.
const MAX_SWEEPS: usize = 5_000;
const KKT_TOL: f64 = 1e-9;

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn check_inputs(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(mismatch(format!("X has {} rows, y has {}", x.nrows(), y.len())));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("penalty must be >= 0, got {lambda}")));
    }
    Ok(())
}

/// Minimizes `1/2 ||y - Xw||^2 + lambda ||w||_1`.
pub fn lasso_cd(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    check_inputs(x, y, lambda)?;
    Ok(lasso_gram(&x.tr_mul(x), &x.tr_mul(y), lambda, None, None))
}

/// Lasso on cross-products `A = X'X`, `b = X'y`. Coordinates flagged in
/// `frozen` stay at zero.
pub(crate) fn lasso_gram(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lambda: f64,
    warm: Option<&DVector<f64>>,
    frozen: Option<&[bool]>,
) -> DVector<f64> {
    let d = b.len();
    let active = |j: usize| frozen.is_none_or(|f| !f[j]) && a[(j, j)] > 0.0;
    let mut w = warm.cloned().unwrap_or_else(|| DVector::zeros(d));
    for j in 0..d {
        if !active(j) {
            w[j] = 0.0;
        }
    }
    let mut aw = a * &w;
    let scale = 1.0 + b.amax();
    for _ in 0..MAX_SWEEPS {
        let mut max_delta: f64 = 0.0;
        for j in 0..d {
            if !active(j) {
                continue;
            }
            let ajj = a[(j, j)];
            let rho = b[j] - aw[j] + ajj * w[j];
            let new = soft_threshold(rho, lambda) / ajj;
            let delta = new - w[j];
            if delta != 0.0 {
                aw.axpy(delta, &a.column(j), 1.0);
                w[j] = new;
                max_delta = max_delta.max(delta.abs() * ajj.sqrt());
            }
        }
        if max_delta == 0.0 || lasso_kkt_gram(a, b, &w, lambda, frozen) <= KKT_TOL * scale.min(1e3) {
            break;
        }
        // Refresh the running product against drift.
        aw = a * &w;
    }
    w
}

fn lasso_kkt_gram(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    w: &DVector<f64>,
    lambda: f64,
    frozen: Option<&[bool]>,
) -> f64 {
    let corr = b - a * w;
    (0..w.len())
        .filter(|&j| frozen.is_none_or(|f| !f[j]))
        .map(|j| {
            if w[j] == 0.0 {
                (corr[j].abs() - lambda).max(0.0)
            } else {
                (corr[j] - lambda * w[j].signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Largest KKT violation of a lasso solution on data.
pub fn lasso_kkt_violation(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, lambda: f64) -> f64 {
    lasso_kkt_gram(&x.tr_mul(x), &x.tr_mul(y), w, lambda, None)
}

/// Minimizes `1/2 ||y - Xw||^2 + lambda sum_g ||w_g||_2` over a partition
/// of the columns into `groups`.
pub fn group_lasso_bcd(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    groups: &[Range<usize>],
) -> Result<DVector<f64>> {
    check_inputs(x, y, lambda)?;
    check_partition(groups, x.ncols())?;
    Ok(group_lasso_gram(&x.tr_mul(x), &x.tr_mul(y), lambda, groups, None))
}

pub(crate) fn check_partition(groups: &[Range<usize>], d: usize) -> Result<()> {
    let mut covered = vec![false; d];
    for g in groups {
        if g.is_empty() {
            return Err(invalid("empty group"));
        }
        if g.end > d {
            return Err(mismatch(format!("group {g:?} exceeds {d} columns")));
        }
        for j in g.clone() {
            if covered[j] {
                return Err(invalid(format!("column {j} appears in two groups")));
            }
            covered[j] = true;
        }
    }
    if covered.iter().any(|c| !c) {
        return Err(invalid("groups do not cover every column"));
    }
    Ok(())
}

pub(crate) fn group_lasso_gram(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lambda: f64,
    groups: &[Range<usize>],
    warm: Option<&DVector<f64>>,
) -> DVector<f64> {
    let d = b.len();
    let mut w = warm.cloned().unwrap_or_else(|| DVector::zeros(d));
    let eigs: Vec<SymmetricEigen<f64, nalgebra::Dyn>> = groups
        .iter()
        .map(|g| SymmetricEigen::new(a.view((g.start, g.start), (g.len(), g.len())).into_owned()))
        .collect();
    let mut aw = a * &w;
    let scale = 1.0 + b.amax();

    for _ in 0..MAX_SWEEPS {
        let mut max_delta: f64 = 0.0;
        for (g, eig) in groups.iter().zip(&eigs) {
            let lip = eig.eigenvalues.max().max(0.0);
            let start_block = w.rows(g.start, g.len()).into_owned();
            let block = if lip == 0.0 {
                DVector::zeros(g.len())
            } else {
                let rho = DVector::from_iterator(g.len(), g.clone().map(|j| b[j] - aw[j]))
                    + a.view((g.start, g.start), (g.len(), g.len())) * &start_block;
                solve_group_block(eig, &rho, lambda)
            };
            let delta = &block - &start_block;
            if delta.amax() > 0.0 {
                for (off, j) in g.clone().enumerate() {
                    if delta[off] != 0.0 {
                        aw.axpy(delta[off], &a.column(j), 1.0);
                    }
                    w[j] = block[off];
                }
                max_delta = max_delta.max(delta.amax() * lip.sqrt());
            }
        }
        if max_delta == 0.0 || group_kkt_gram(a, b, &w, lambda, groups) <= KKT_TOL * scale.min(1e3) {
            break;
        }
        aw = a * &w;
    }
    w
}

/// Exact minimizer of `1/2 u'Au - rho'u + lambda ||u||` given `A = Q diag(l) Q'`.
///
/// A nonzero solution has `u = (A + lambda/t I)^{-1} rho` with `t = ||u||`,
/// i.e. `t` solves `sum_i rt_i^2 / (t l_i + lambda)^2 = 1` where `rt = Q' rho`.
/// That function is decreasing in `t`; its inverse square root is close to
/// linear, so a bracketed Newton iteration on it converges in a few steps.
fn solve_group_block(eig: &SymmetricEigen<f64, nalgebra::Dyn>, rho: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let n = rho.len();
    let rn = rho.norm();
    if rn <= lambda {
        return DVector::zeros(n);
    }
    let rt = eig.eigenvectors.tr_mul(rho);
    let l = eig.eigenvalues.map(|x| x.max(0.0));
    let phi = |t: f64| -> (f64, f64) {
        let mut f = 0.0;
        let mut df = 0.0;
        for i in 0..n {
            let den = t * l[i] + lambda;
            f += rt[i] * rt[i] / (den * den);
            df -= 2.0 * rt[i] * rt[i] * l[i] / (den * den * den);
        }
        (f, df)
    };
    let lmin = l.min();
    let mut lo = 0.0;
    let mut hi = if lmin > 0.0 { (rn - lambda) / lmin } else { f64::INFINITY };
    if !hi.is_finite() {
        // Grow an upper bracket; an unbounded direction would need rt mass
        // on null eigenvectors beyond lambda, which the caller excludes.
        hi = (rn - lambda) / l.max();
        while phi(hi).0 > 1.0 && hi < 1e300 {
            hi *= 2.0;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (f, df) = phi(t);
        if f > 1.0 {
            lo = t;
        } else {
            hi = t;
        }
        // Newton on g(t) = f^(-1/2) - 1.
        let g = f.powf(-0.5) - 1.0;
        let dg = -0.5 * f.powf(-1.5) * df;
        let mut next = if dg > 0.0 { t - g / dg } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t.max(f64::MIN_POSITIVE) || hi - lo <= 1e-15 * hi {
            t = next;
            break;
        }
        t = next;
    }
    let mu = lambda / t;
    let coef = DVector::from_fn(n, |i, _| rt[i] / (l[i] + mu));
    &eig.eigenvectors * coef
}

fn group_kkt_gram(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    w: &DVector<f64>,
    lambda: f64,
    groups: &[Range<usize>],
) -> f64 {
    let corr = b - a * w;
    groups
        .iter()
        .map(|g| {
            let cg = corr.rows(g.start, g.len());
            let wg = w.rows(g.start, g.len());
            let nw = wg.norm();
            if nw == 0.0 {
                (cg.norm() - lambda).max(0.0)
            } else {
                (cg - wg * (lambda / nw)).amax()
            }
        })
        .fold(0.0, f64::max)
}

/// Largest block-KKT violation of a group lasso solution on data.
pub fn group_lasso_kkt_violation(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
    lambda: f64,
    groups: &[Range<usize>],
) -> f64 {
    group_kkt_gram(&x.tr_mul(x), &x.tr_mul(y), w, lambda, groups)
}
