//! SingleCluster-VAR: one structural vector shared by every task.
//!
//! Alternates between (1) an exact ridge solve for the raw weights `V` with
//! inputs reweighted by `Gamma`, and (2) a simplex-constrained least-squares
//! solve for the shared cross-series weights `alpha_bar`. The own-history
//! blocks keep a fixed weight of one.

use nalgebra::{DMatrix, DVector};

use crate::design::{DesignGram, LagDesign};
use crate::error::{mismatch, Result};
use crate::model::{assemble_w, gamma_from_alpha, VarModel};
use crate::solvers::{pgd_quadratic, Quadratic, SimplexSet};
use crate::structure::{
    check_finite, check_lambda_kappa, penalized_objective, relative_change, simplex_violation,
    solve_v, task_products, FitOptions,
};

/// Weight of the own-history blocks.
pub const TAU: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ScvarState {
    pub alpha_bar: DVector<f64>,
    pub v: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub tau: f64,
    pub kappa: f64,
    pub lambda: f64,
    /// Penalized objective `L(Gamma, V) + lambda ||V||_F^2` after each outer iteration.
    pub objective_trace: Vec<f64>,
    /// Largest simplex-constraint violation after each outer iteration.
    pub feasibility_trace: Vec<f64>,
    /// Assembled `W` after each outer iteration (only with `record_history`).
    pub history: Vec<DMatrix<f64>>,
    pub converged: bool,
    /// Inner PGD solves that stopped at their iteration cap.
    pub pgd_warnings: usize,
}

pub fn fit_scvar(
    design: &LagDesign,
    lambda: f64,
    kappa: f64,
    opts: &FitOptions,
) -> Result<(ScvarState, VarModel)> {
    let gram = design.gram();
    let state = fit_scvar_gram(&gram, lambda, kappa, opts)?;
    let w = assemble_w(&state.gamma, &state.v, design.p)?;
    Ok((state, VarModel::new(w, design.p, design.names.clone())?))
}

pub fn fit_scvar_gram(
    gram: &DesignGram,
    lambda: f64,
    kappa: f64,
    opts: &FitOptions,
) -> Result<ScvarState> {
    let k = gram.n_series();
    let init = DVector::from_element(k, kappa / k as f64);
    fit_scvar_from(gram, lambda, kappa, init, opts)
}

/// Runs the alternation from a given structural vector. The start is used
/// as-is (it is not projected) so that degenerate starts such as the zero
/// vector can be studied.
pub fn fit_scvar_from(
    gram: &DesignGram,
    lambda: f64,
    kappa: f64,
    alpha_init: DVector<f64>,
    opts: &FitOptions,
) -> Result<ScvarState> {
    check_lambda_kappa(lambda, kappa)?;
    opts.validate()?;
    gram.check()?;
    let (k, p) = (gram.n_series(), gram.p);
    if alpha_init.len() != k {
        return Err(mismatch(format!("alpha has {} entries for {k} series", alpha_init.len())));
    }

    let mut alpha = alpha_init;
    let mut v = DMatrix::zeros(k * p, k);
    let mut prev = gram.yty.trace();
    let mut state = ScvarState {
        alpha_bar: alpha.clone(),
        v: v.clone(),
        gamma: gamma_from_alpha(&alpha, TAU),
        tau: TAU,
        kappa,
        lambda,
        objective_trace: Vec::new(),
        feasibility_trace: Vec::new(),
        history: Vec::new(),
        converged: false,
        pgd_warnings: 0,
    };

    for _ in 0..opts.max_outer {
        // V given alpha.
        let gamma = gamma_from_alpha(&alpha, TAU);
        v = solve_v(gram, &gamma, lambda)?;

        // alpha given V, on the stacked system ||vec(R) - H alpha||^2.
        let products = task_products(gram, &v);
        let mut quad = Quadratic {
            q: DMatrix::zeros(k, k),
            c: DVector::zeros(k),
            s: 0.0,
        };
        for tp in &products {
            quad.q += &tp.hh;
            quad.c += &tp.hr;
            quad.s += tp.rr;
        }
        let res = pgd_quadratic(&quad, &alpha, SimplexSet::Single { kappa }, &opts.pgd)?;
        if !res.converged {
            state.pgd_warnings += 1;
        }
        alpha = res.x;

        let gamma = gamma_from_alpha(&alpha, TAU);
        let obj = penalized_objective(&products, &gamma, &v, lambda);
        check_finite(obj)?;
        state.objective_trace.push(obj);
        state
            .feasibility_trace
            .push(simplex_violation(alpha.iter().copied(), kappa));
        if opts.record_history {
            state.history.push(assemble_w(&gamma, &v, p)?);
        }
        let done = relative_change(prev, obj) <= opts.outer_tol;
        prev = obj;
        if done {
            state.converged = true;
            break;
        }
    }

    state.gamma = gamma_from_alpha(&alpha, TAU);
    state.alpha_bar = alpha;
    state.v = v;
    Ok(state)
}
