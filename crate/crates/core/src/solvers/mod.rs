//! Convex subproblem solvers shared by every fitting method.

mod lasso;
mod pgd;
mod ridge;
mod simplex;

pub use lasso::{
    group_lasso_bcd, group_lasso_kkt_violation, lasso_cd, lasso_kkt_violation,
};
pub(crate) use lasso::{group_lasso_gram, lasso_gram};
pub use pgd::{pgd_quadratic, pgd_simplex_ls, PgdOptions, PgdResult, Quadratic, SimplexSet};
pub use ridge::{ridge_solve, ridge_solve_gram};
pub use simplex::project_simplex;
