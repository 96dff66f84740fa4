//! Projected gradient descent with backtracking for simplex-constrained
//! least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::simplex::project_simplex_in_place;
use crate::error::{invalid, mismatch, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PgdOptions {
    pub max_iter: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tol: f64,
    /// Backtracking shrink factor.
    pub beta: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    pub step_init: f64,
}

impl Default for PgdOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
            beta: 0.5,
            armijo: 1e-4,
            step_init: 1.0,
        }
    }
}

impl PgdOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iter > 0
            && self.tol > 0.0
            && self.beta > 0.0
            && self.beta < 1.0
            && self.armijo > 0.0
            && self.armijo < 1.0
            && self.step_init > 0.0
            && self.step_init.is_finite();
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid PGD options {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdResult {
    pub x: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// False when `max_iter` was hit before the tolerance was met.
    pub converged: bool,
}

/// `f(x) = x' Q x - 2 c' x + s`, i.e. `||r - H x||^2` with `Q = H'H`,
/// `c = H'r`, `s = r'r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub s: f64,
}

impl Quadratic {
    pub fn from_least_squares(h: &DMatrix<f64>, r: &DVector<f64>) -> Self {
        Self {
            q: h.tr_mul(h),
            c: h.tr_mul(r),
            s: r.dot(r),
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (&self.q * x).dot(x) - 2.0 * self.c.dot(x) + self.s
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.q * x - &self.c) * 2.0
    }
}

/// Feasible sets that PGD can project onto.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimplexSet {
    /// `{x >= 0, sum(x) = kappa}`.
    Single { kappa: f64 },
    /// `x` split into consecutive chunks of `len`, each on its own
    /// `kappa`-simplex.
    Columns { len: usize, kappa: f64 },
}

impl SimplexSet {
    pub fn project(&self, x: &mut [f64]) {
        match *self {
            SimplexSet::Single { kappa } => project_simplex_in_place(x, kappa),
            SimplexSet::Columns { len, kappa } => {
                for chunk in x.chunks_mut(len) {
                    project_simplex_in_place(chunk, kappa);
                }
            }
        }
    }
}

/// Minimizes `||r - H x||^2` over the `kappa`-scaled simplex.
pub fn pgd_simplex_ls(
    h: &DMatrix<f64>,
    r: &DVector<f64>,
    kappa: f64,
    x0: &DVector<f64>,
    opts: &PgdOptions,
) -> Result<PgdResult> {
    if h.nrows() != r.len() || h.ncols() != x0.len() {
        return Err(mismatch(format!(
            "H is {}x{}, r has {}, x0 has {}",
            h.nrows(),
            h.ncols(),
            r.len(),
            x0.len()
        )));
    }
    if !(kappa > 0.0) {
        return Err(invalid(format!("simplex scale must be positive, got {kappa}")));
    }
    pgd_quadratic(
        &Quadratic::from_least_squares(h, r),
        x0,
        SimplexSet::Single { kappa },
        opts,
    )
}

/// Projected gradient on a convex quadratic. Iterates stay feasible and the
/// objective never increases.
pub fn pgd_quadratic(
    f: &Quadratic,
    x0: &DVector<f64>,
    set: SimplexSet,
    opts: &PgdOptions,
) -> Result<PgdResult> {
    opts.validate()?;
    if f.q.nrows() != x0.len() || f.c.len() != x0.len() {
        return Err(mismatch("quadratic and start point"));
    }
    let mut x = x0.clone();
    set.project(x.as_mut_slice());
    // Q x is carried along so each candidate costs one product.
    let value = |x: &DVector<f64>, qx: &DVector<f64>| qx.dot(x) - 2.0 * f.c.dot(x) + f.s;
    let mut qx = &f.q * &x;
    let mut fx = value(&x, &qx);
    let mut step = opts.step_init;
    let mut converged = false;
    let mut iterations = 0;

    'outer: while iterations < opts.max_iter {
        iterations += 1;
        let g = (&qx - &f.c) * 2.0;
        let (x_new, qx_new, f_new) = loop {
            let mut cand = &x - &g * step;
            set.project(cand.as_mut_slice());
            let d = &cand - &x;
            if d.amax() == 0.0 {
                // Stationary: the projected step does not move.
                converged = true;
                break 'outer;
            }
            let qc = &f.q * &cand;
            let fc = value(&cand, &qc);
            if fc <= fx + opts.armijo * g.dot(&d) && fc <= fx {
                break (cand, qc, fc);
            }
            step *= opts.beta;
            if step < f64::MIN_POSITIVE {
                converged = true;
                break 'outer;
            }
        };
        let decrease = fx - f_new;
        let scale = fx.abs().max(f64::MIN_POSITIVE);
        // Next trial step: Barzilai-Borwein s's / s'y with y = 2 Q s, which
        // costs nothing here since Q x is tracked. Backtracking still
        // guards every step.
        let s_vec = &x_new - &x;
        let sqs = s_vec.dot(&(&qx_new - &qx));
        let bb = s_vec.norm_squared() / (2.0 * sqs);
        step = if sqs > 0.0 && bb.is_finite() { bb } else { step / opts.beta };
        x = x_new;
        qx = qx_new;
        fx = f_new;
        if decrease <= opts.tol * scale {
            converged = true;
            break;
        }
    }

    Ok(PgdResult {
        x,
        objective: fx,
        iterations,
        converged,
    })
}
