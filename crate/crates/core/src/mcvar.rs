//! MultiCluster-VAR: the structural matrix is factorized as `A = D G`, with
//! dictionary atoms (columns of `D`) on the `kappa`-simplex acting as
//! cluster prototypes and per-task weights (columns of `G`) on the unit
//! simplex acting as soft cluster memberships.
//!
//! Each outer iteration updates `V` (ridge), then `G` (one simplex least
//! squares per task), then `D` (one joint solve over the product of column
//! simplices).
//!
//! # Symmetry breaking
//!
//! From the uniform start every column of `D` is identical. In exact
//! arithmetic that is a fixed point of the `G` and `D` updates (identical
//! atoms receive identical gradients) and the fit would equal SCVAR for any
//! rank. In floating point it is an unstable saddle: rounding differences
//! of order 1e-15 grow each iteration and split the atoms after roughly ten
//! iterations, in a direction set by rounding rather than by the data. With
//! [`McvarInit::Seeded`] (the default) the first iteration, while the atoms
//! are still identical, re-seeds `G` from a deterministic clustering of
//! per-task structural fits. Because `D G` does not depend on `G` when the
//! atoms coincide, the seeding leaves the objective unchanged and the trace
//! stays monotone.

use nalgebra::{DMatrix, DVector};

use crate::design::{DesignGram, LagDesign};
use crate::error::{invalid, mismatch, Result};
use crate::model::{assemble_w, gamma_from_structure, VarModel};
use crate::solvers::{pgd_quadratic, PgdOptions, Quadratic, SimplexSet};
use crate::structure::{
    check_finite, check_lambda_kappa, penalized_objective, relative_change, simplex_violation,
    solve_v, task_products, FitOptions, TaskProducts,
};

/// Share of each seeded `G` column spread uniformly over all atoms.
pub const SEED_SPREAD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum McvarInit {
    /// `d_ij = kappa/K`, `g_ij = 1/r`, with no symmetry breaking.
    Uniform,
    /// Uniform start, with `G` re-seeded from per-task structure fits while
    /// the atoms of `D` coincide.
    #[default]
    Seeded,
    /// Explicit start; `G` is still re-seeded if all atoms coincide.
    Warm { d: DMatrix<f64>, g: DMatrix<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct McvarState {
    /// `K x r` dictionary, columns on the `kappa`-simplex.
    pub d: DMatrix<f64>,
    /// `r x K` weights, columns on the unit simplex.
    pub g: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub rank: usize,
    pub kappa: f64,
    pub lambda: f64,
    pub objective_trace: Vec<f64>,
    /// Objective after each block update (V, G, D) in order.
    pub block_trace: Vec<f64>,
    pub feasibility_trace: Vec<f64>,
    pub history: Vec<DMatrix<f64>>,
    pub converged: bool,
    pub pgd_warnings: usize,
    /// Whether `G` was re-seeded to break the atom symmetry.
    pub seeded: bool,
}

impl McvarState {
    pub fn structure(&self) -> DMatrix<f64> {
        &self.d * &self.g
    }
}

pub fn fit_mcvar(
    design: &LagDesign,
    lambda: f64,
    kappa: f64,
    rank: usize,
    opts: &FitOptions,
) -> Result<(McvarState, VarModel)> {
    let state = fit_mcvar_gram(&design.gram(), lambda, kappa, rank, opts, &McvarInit::Seeded)?;
    let w = assemble_w(&state.gamma, &state.v, design.p)?;
    Ok((state, VarModel::new(w, design.p, design.names.clone())?))
}

pub fn fit_mcvar_gram(
    gram: &DesignGram,
    lambda: f64,
    kappa: f64,
    rank: usize,
    opts: &FitOptions,
    init: &McvarInit,
) -> Result<McvarState> {
    check_lambda_kappa(lambda, kappa)?;
    opts.validate()?;
    gram.check()?;
    let (k, p) = (gram.n_series(), gram.p);
    if rank == 0 || rank > k {
        return Err(invalid(format!("rank must be in 1..={k}, got {rank}")));
    }

    let (mut d, mut g, seed_allowed) = match init {
        McvarInit::Uniform => (
            DMatrix::from_element(k, rank, kappa / k as f64),
            DMatrix::from_element(rank, k, 1.0 / rank as f64),
            false,
        ),
        McvarInit::Seeded => (
            DMatrix::from_element(k, rank, kappa / k as f64),
            DMatrix::from_element(rank, k, 1.0 / rank as f64),
            true,
        ),
        McvarInit::Warm { d, g } => {
            if d.shape() != (k, rank) || g.shape() != (rank, k) {
                return Err(mismatch("warm-start D/G shapes"));
            }
            (d.clone(), g.clone(), true)
        }
    };

    let mut v = DMatrix::zeros(k * p, k);
    let mut prev = gram.yty.trace();
    let mut state = McvarState {
        d: d.clone(),
        g: g.clone(),
        v: v.clone(),
        gamma: gamma_from_structure(&(&d * &g)),
        rank,
        kappa,
        lambda,
        objective_trace: Vec::new(),
        block_trace: Vec::new(),
        feasibility_trace: Vec::new(),
        history: Vec::new(),
        converged: false,
        pgd_warnings: 0,
        seeded: false,
    };

    for _ in 0..opts.max_outer {
        // V given A = DG.
        let gamma = gamma_from_structure(&(&d * &g));
        v = solve_v(gram, &gamma, lambda)?;
        let products = task_products(gram, &v);
        state
            .block_trace
            .push(penalized_objective(&products, &gamma, &v, lambda));

        if seed_allowed && rank > 1 && atoms_coincide(&d) {
            if let Some(seeded) = seed_weights(&products, kappa, rank, &opts.pgd)? {
                g = seeded;
                state.seeded = true;
            }
        }

        // Each column of G given D.
        for (kk, tp) in products.iter().enumerate() {
            let quad = Quadratic {
                q: d.tr_mul(&tp.hh) * &d,
                c: d.tr_mul(&tp.hr),
                s: tp.rr,
            };
            let res = pgd_quadratic(
                &quad,
                &g.column(kk).into_owned(),
                SimplexSet::Single { kappa: 1.0 },
                &opts.pgd,
            )?;
            if !res.converged {
                state.pgd_warnings += 1;
            }
            g.set_column(kk, &res.x);
        }
        let gamma = gamma_from_structure(&(&d * &g));
        state
            .block_trace
            .push(penalized_objective(&products, &gamma, &v, lambda));

        // vec(D) given G, per-column simplex constraints.
        let quad = dictionary_quadratic(&products, &g);
        let res = pgd_quadratic(
            &quad,
            &DVector::from_column_slice(d.as_slice()),
            SimplexSet::Columns { len: k, kappa },
            &opts.pgd,
        )?;
        if !res.converged {
            state.pgd_warnings += 1;
        }
        d = DMatrix::from_column_slice(k, rank, res.x.as_slice());

        let gamma = gamma_from_structure(&(&d * &g));
        let obj = penalized_objective(&products, &gamma, &v, lambda);
        check_finite(obj)?;
        state.block_trace.push(obj);
        state.objective_trace.push(obj);
        state.feasibility_trace.push(feasibility(&d, &g, kappa));
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

    state.gamma = gamma_from_structure(&(&d * &g));
    state.d = d;
    state.g = g;
    state.v = v;
    Ok(state)
}

/// Quadratic in `vec(D)` (column-major, index `j*K + i`) of
/// `sum_k ||r_k - H_k D g_k||^2`.
fn dictionary_quadratic(products: &[TaskProducts], g: &DMatrix<f64>) -> Quadratic {
    let (r, k) = g.shape();
    let n = r * k;
    let mut q = DMatrix::zeros(n, n);
    let mut c = DVector::zeros(n);
    let mut s = 0.0;
    for (kk, tp) in products.iter().enumerate() {
        for j in 0..r {
            let gj = g[(j, kk)];
            if gj == 0.0 {
                continue;
            }
            let mut cj = c.rows_mut(j * k, k);
            cj.axpy(gj, &tp.hr, 1.0);
            for j2 in 0..r {
                let w = gj * g[(j2, kk)];
                if w == 0.0 {
                    continue;
                }
                let mut blk = q.view_mut((j * k, j2 * k), (k, k));
                blk.zip_apply(&tp.hh, |a, b| *a += w * b);
            }
        }
        s += tp.rr;
    }
    Quadratic { q, c, s }
}

fn feasibility(d: &DMatrix<f64>, g: &DMatrix<f64>, kappa: f64) -> f64 {
    let dv = d
        .column_iter()
        .map(|c| simplex_violation(c.iter().copied(), kappa));
    let gv = g
        .column_iter()
        .map(|c| simplex_violation(c.iter().copied(), 1.0));
    dv.chain(gv).fold(0.0, f64::max)
}

fn atoms_coincide(d: &DMatrix<f64>) -> bool {
    let first = d.column(0);
    d.column_iter().skip(1).all(|c| c == first)
}

/// Hard clusters of the tasks from per-task structural fits, turned into
/// soft weights `(1 - s) e_label + s / r`. Returns `None` when all tasks
/// look alike, leaving `G` untouched.
fn seed_weights(
    products: &[TaskProducts],
    kappa: f64,
    rank: usize,
    pgd: &PgdOptions,
) -> Result<Option<DMatrix<f64>>> {
    let k = products.len();
    let start = DVector::from_element(k, kappa / k as f64);
    let mut features = Vec::with_capacity(k);
    for (kk, tp) in products.iter().enumerate() {
        let quad = Quadratic {
            q: tp.hh.clone(),
            c: tp.hr.clone(),
            s: tp.rr,
        };
        let mut a = pgd_quadratic(&quad, &start, SimplexSet::Single { kappa }, pgd)?.x;
        // The own entry plays no role in task kk's loss; neutralize it with
        // the mean of the others so identical fits stay identical.
        a[kk] = if k > 1 { (a.sum() - a[kk]) / (k - 1) as f64 } else { 0.0 };
        features.push(a);
    }
    let spread = features
        .iter()
        .map(|f| (f - &features[0]).amax())
        .fold(0.0, f64::max);
    if spread <= 1e-12 * kappa {
        return Ok(None);
    }
    let labels = kmeans_labels(&features, rank);
    let mut g = DMatrix::from_element(rank, k, SEED_SPREAD / rank as f64);
    for (kk, &lab) in labels.iter().enumerate() {
        g[(lab, kk)] += 1.0 - SEED_SPREAD;
    }
    Ok(Some(g))
}

/// Deterministic k-means: farthest-point initialization, then Lloyd
/// iterations. Ties go to the lowest index.
pub(crate) fn kmeans_labels(points: &[DVector<f64>], clusters: usize) -> Vec<usize> {
    let n = points.len();
    let dim = points[0].len();
    let mean = points.iter().fold(DVector::zeros(dim), |acc, x| acc + x) / n as f64;
    let argmax = |score: &dyn Fn(usize) -> f64| {
        (0..n).fold((0, f64::NEG_INFINITY), |best, i| {
            let s = score(i);
            if s > best.1 {
                (i, s)
            } else {
                best
            }
        })
    };
    let mut centers = vec![points[argmax(&|i| (&points[i] - &mean).norm_squared()).0].clone()];
    while centers.len() < clusters {
        let (idx, _) = argmax(&|i| {
            centers
                .iter()
                .map(|c| (&points[i] - c).norm_squared())
                .fold(f64::INFINITY, f64::min)
        });
        centers.push(points[idx].clone());
    }
    let nearest = |x: &DVector<f64>, centers: &[DVector<f64>]| {
        (0..centers.len()).fold((0, f64::INFINITY), |best, j| {
            let dist = (x - &centers[j]).norm_squared();
            if dist < best.1 {
                (j, dist)
            } else {
                best
            }
        })
        .0
    };
    let mut labels: Vec<usize> = points.iter().map(|x| nearest(x, &centers)).collect();
    for _ in 0..100 {
        for (j, c) in centers.iter_mut().enumerate() {
            let members: Vec<&DVector<f64>> =
                (0..n).filter(|&i| labels[i] == j).map(|i| &points[i]).collect();
            if !members.is_empty() {
                *c = members.iter().fold(DVector::zeros(dim), |acc, x| acc + *x)
                    / members.len() as f64;
            }
        }
        let next: Vec<usize> = points.iter().map(|x| nearest(x, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

/// Hard cluster label of each task: the row of its largest weight in `G`
/// (0-based; ties go to the lowest row).
pub fn cluster_assignments(g: &DMatrix<f64>) -> Vec<usize> {
    g.column_iter()
        .map(|col| {
            (0..col.len()).fold(0, |best, j| if col[j] > col[best] { j } else { best })
        })
        .collect()
}

/// The literal D-step design `(G' ⊗ 1_T 1_K') ⊙ (1_r' ⊗ H)` for a stacked
/// `H` of `K` blocks with `n_rows` rows each.
pub fn hadamard_kronecker_design(g: &DMatrix<f64>, h: &DMatrix<f64>, n_rows: usize) -> DMatrix<f64> {
    let (r, k) = g.shape();
    let g_hat = g.transpose().kronecker(&DMatrix::from_element(n_rows, k, 1.0));
    let h_hat = DMatrix::from_element(1, r, 1.0).kronecker(h);
    g_hat.component_mul(&h_hat)
}
