use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, mismatch, Error, Result};

/// Exact minimizer of `||y - Z w||^2 + lambda ||w||^2`.
pub fn ridge_solve(z: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if z.nrows() != y.len() {
        return Err(mismatch(format!("Z has {} rows, y has {}", z.nrows(), y.len())));
    }
    ridge_solve_gram(z.tr_mul(z), &z.tr_mul(y), lambda)
}

/// Ridge solve from cross-products: `(ZtZ + lambda I) w = Zty`.
pub fn ridge_solve_gram(
    mut ztz: DMatrix<f64>,
    zty: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("ridge penalty must be >= 0, got {lambda}")));
    }
    if ztz.nrows() != zty.len() || !ztz.is_square() {
        return Err(mismatch("ridge normal equations"));
    }
    for i in 0..ztz.nrows() {
        ztz[(i, i)] += lambda;
    }
    let chol = ztz
        .cholesky()
        .ok_or_else(|| Error::Singular("ridge system is not positive definite".into()))?;
    let l = chol.l_dirty();
    let dmax = (0..l.nrows()).map(|i| l[(i, i)]).fold(0.0, f64::max);
    if (0..l.nrows()).any(|i| !(l[(i, i)] > dmax * 1e-7)) {
        return Err(Error::Singular("ridge system is numerically singular".into()));
    }
    let w = chol.solve(zty);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ridge solution".into()));
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_examples() {
        let z = DMatrix::identity(2, 2);
        let y = DVector::from_vec(vec![2.0, 4.0]);
        assert_eq!(ridge_solve(&z, &y, 0.0).unwrap(), y);
        // (I + I)^{-1} y
        let w = ridge_solve(&z, &y, 1.0).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-15 && (w[1] - 2.0).abs() < 1e-15);
        let w = ridge_solve(&DMatrix::from_element(1, 1, 2.0), &DVector::from_element(1, 2.0), 0.0)
            .unwrap();
        assert!((w[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_without_penalty() {
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(ridge_solve(&z, &y, 0.0), Err(Error::Singular(_))));
        assert!(ridge_solve(&z, &y, 0.1).is_ok());
    }

    #[test]
    fn gradient_vanishes() {
        let z = DMatrix::from_fn(7, 4, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let y = DVector::from_fn(7, |i, _| (i as f64).sin());
        let lambda = 0.3;
        let w = ridge_solve(&z, &y, lambda).unwrap();
        let zty = z.tr_mul(&y);
        let grad = (z.tr_mul(&z) * &w + &w * lambda - &zty) * 2.0;
        assert!(grad.norm() < 1e-8 * (1.0 + zty.norm()));
    }
}
