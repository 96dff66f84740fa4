use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baselines::BaselineModel;
use crate::design::LagDesign;
use crate::error::{invalid, mismatch, Result};
use crate::model::VarModel;

/// Anything that maps lag rows to one-step forecasts.
pub trait Predictor {
    fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>>;
}

impl Predictor for VarModel {
    fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.w.nrows() {
            return Err(mismatch(format!(
                "lag matrix has {} columns, W has {} rows",
                x.ncols(),
                self.w.nrows()
            )));
        }
        Ok(x * &self.w)
    }
}

impl Predictor for BaselineModel {
    fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        BaselineModel::predict(self, x)
    }
}

pub fn forecast_one_step(model: &VarModel, lag_row: &DVector<f64>) -> Result<DVector<f64>> {
    if lag_row.len() != model.w.nrows() {
        return Err(mismatch(format!(
            "lag row has {} entries, expected {}",
            lag_row.len(),
            model.w.nrows()
        )));
    }
    Ok(model.w.tr_mul(lag_row))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseSummary {
    pub per_series: Vec<f64>,
    pub mse: f64,
    /// Squared error averaged across series, one entry per holdout row.
    pub per_time: Vec<f64>,
}

pub fn mse_from_predictions(pred: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<MseSummary> {
    if pred.shape() != y.shape() {
        return Err(mismatch("prediction and target shapes differ"));
    }
    let (n, k) = y.shape();
    if n == 0 || k == 0 {
        return Err(invalid("empty holdout"));
    }
    let sq = (pred - y).map(|e| e * e);
    let per_series: Vec<f64> = sq.column_iter().map(|c| c.sum() / n as f64).collect();
    let per_time: Vec<f64> = sq.row_iter().map(|r| r.sum() / k as f64).collect();
    let mse = per_series.iter().sum::<f64>() / k as f64;
    Ok(MseSummary { per_series, mse, per_time })
}

pub fn holdout_mse(model: &dyn Predictor, holdout: &LagDesign) -> Result<MseSummary> {
    mse_from_predictions(&model.predict(&holdout.x)?, &holdout.y)
}

pub fn relative_mse(mse: f64, reference: f64) -> Result<f64> {
    if !(reference > 0.0) || !reference.is_finite() {
        return Err(invalid(format!("reference MSE must be positive, got {reference}")));
    }
    Ok(mse / reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forecast_examples() {
        let z = VarModel::zeros(3, 2);
        assert!(forecast_one_step(&z, &DVector::from_element(6, 4.0)).unwrap().iter().all(|&x| x == 0.0));
        let m = VarModel::new(DMatrix::from_element(1, 1, 0.5), 1, vec!["a".into()]).unwrap();
        assert_eq!(forecast_one_step(&m, &DVector::from_element(1, 2.0)).unwrap()[0], 1.0);
        // lag-1 copy for K=2, p=2
        let mut w = DMatrix::zeros(4, 2);
        w[(0, 0)] = 1.0;
        w[(2, 1)] = 1.0;
        let m = VarModel::new(w, 2, vec!["a".into(), "b".into()]).unwrap();
        let f = forecast_one_step(&m, &DVector::from_vec(vec![3.0, 9.0, -1.0, 7.0])).unwrap();
        assert_eq!(f.as_slice(), &[3.0, -1.0]);
        assert!(forecast_one_step(&m, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn relative_examples() {
        assert_eq!(relative_mse(2.0, 1.0).unwrap(), 2.0);
        assert_eq!(relative_mse(1.0, 1.0).unwrap(), 1.0);
        assert!(relative_mse(1.0, 0.0).is_err());
    }

    #[test]
    fn perfect_predictions_have_zero_error() {
        let y = DMatrix::from_fn(5, 2, |i, j| (i * j) as f64);
        let s = mse_from_predictions(&y, &y).unwrap();
        assert_eq!(s.mse, 0.0);
        assert_eq!(s.per_time.len(), 5);
        assert!(mse_from_predictions(&DMatrix::zeros(0, 2), &DMatrix::zeros(0, 2)).is_err());
    }
}
