use crate::error::{invalid, Error, Result};

/// Euclidean projection of `v` onto `{x >= 0, sum(x) = kappa}`.
///
/// Sort-and-threshold: find the largest `rho` with
/// `u_rho - (sum_{i<=rho} u_i - kappa) / rho > 0` on the descending sort `u`,
/// then clip `v - theta` at zero.
pub fn project_simplex(v: &[f64], kappa: f64) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(invalid("cannot project an empty vector"));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(invalid(format!("simplex scale must be positive, got {kappa}")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("simplex projection input".into()));
    }
    let mut x = v.to_vec();
    project_simplex_in_place(&mut x, kappa);
    Ok(x)
}

/// Same as [`project_simplex`] without argument checks.
pub(crate) fn project_simplex_in_place(x: &mut [f64], kappa: f64) {
    let n = x.len();
    if n == 1 {
        x[0] = kappa;
        return;
    }
    let mut u = x.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - kappa) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for xi in x.iter_mut() {
        *xi = (*xi - theta).max(0.0);
    }
    // Float residue from the threshold; push it onto the largest entry.
    let sum: f64 = x.iter().sum();
    let drift = kappa - sum;
    if drift != 0.0 {
        let imax = (0..n).max_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap_or(0);
        x[imax] += drift;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn feasible_point_unchanged() {
        let x = project_simplex(&[0.4, 0.6], 1.0).unwrap();
        assert!((x[0] - 0.4).abs() < 1e-15 && (x[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn symmetric_point() {
        assert_eq!(project_simplex(&[1.0, 1.0], 1.0).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn corner() {
        // grid oracle over the 1-simplex: minimize (x-2)^2 + (1-x)^2 for x in [0,1]
        let best = (0..=10_000)
            .map(|i| i as f64 / 10_000.0)
            .min_by(|a, b| {
                let f = |x: f64| (x - 2.0).powi(2) + (1.0 - x).powi(2);
                f(*a).total_cmp(&f(*b))
            })
            .unwrap();
        let x = project_simplex(&[2.0, 0.0], 1.0).unwrap();
        assert!((x[0] - best).abs() < 1e-4);
        assert_eq!(x, vec![1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(project_simplex(&[], 1.0).is_err());
        assert!(project_simplex(&[1.0], 0.0).is_err());
        assert!(project_simplex(&[f64::NAN, 1.0], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn feasible_and_idempotent(
            v in prop::collection::vec(-10.0f64..10.0, 1..12),
            kappa in 0.01f64..10.0,
        ) {
            let x = project_simplex(&v, kappa).unwrap();
            prop_assert!(x.iter().all(|&xi| xi >= 0.0));
            prop_assert!((x.iter().sum::<f64>() - kappa).abs() <= 1e-12 * (1.0 + kappa));
            let y = project_simplex(&x, kappa).unwrap();
            for (a, b) in x.iter().zip(&y) {
                prop_assert!((a - b).abs() < 1e-12 * (1.0 + kappa));
            }
        }

        #[test]
        fn optimality_conditions(v in prop::collection::vec(-5.0f64..5.0, 2..8)) {
            // x = max(v - theta, 0): positive entries share v_i - x_i = theta,
            // zero entries have v_i <= theta.
            let x = project_simplex(&v, 1.0).unwrap();
            let support: Vec<usize> = (0..v.len()).filter(|&i| x[i] > 0.0).collect();
            let theta = v[support[0]] - x[support[0]];
            for i in 0..v.len() {
                if x[i] > 0.0 {
                    prop_assert!((v[i] - x[i] - theta).abs() < 1e-10);
                } else {
                    prop_assert!(v[i] <= theta + 1e-10);
                }
            }
        }
    }
}
