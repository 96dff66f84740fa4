//! Hyperparameter selection by blocked K-fold cross-validation.

use serde::{Deserialize, Serialize};

use crate::design::LagDesign;
use crate::error::{invalid, Result};
use crate::evaluate::{mse_from_predictions, Predictor};
use crate::methods::{Hyper, Method};
use crate::structure::FitOptions;

/// Absolute slack under which two CV scores count as tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lambda_values: Vec<f64>,
    pub kappa_values: Vec<f64>,
    #[serde(default)]
    pub r_values: Option<Vec<usize>>,
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|i| match i {
                    0 => lo,
                    _ if i == n - 1 => hi,
                    _ => 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64),
                })
                .collect()
        }
    }
}

/// Rank candidates `{1, 2, 3, ceil(K/4), K}` clipped to `K`, deduplicated.
pub fn default_ranks(k: usize) -> Vec<usize> {
    let mut r: Vec<usize> = [1, 2, 3, k.div_ceil(4), k].into_iter().filter(|&x| x >= 1 && x <= k).collect();
    r.sort_unstable();
    r.dedup();
    r
}

impl Grid {
    /// 10 lambdas on `[1e-4, 1]`, 4 kappas on `[1e-2, 10]`, default ranks.
    pub fn standard(k: usize) -> Self {
        Self {
            lambda_values: log_grid(1e-4, 1.0, 10),
            kappa_values: log_grid(1e-2, 10.0, 4),
            r_values: Some(default_ranks(k)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sorted_pos = |v: &[f64]| v.iter().all(|&x| x > 0.0 && x.is_finite()) && v.windows(2).all(|w| w[0] < w[1]);
        if !sorted_pos(&self.lambda_values) || !sorted_pos(&self.kappa_values) {
            return Err(invalid("grid values must be positive and strictly increasing"));
        }
        if let Some(r) = &self.r_values {
            if r.contains(&0) || !r.windows(2).all(|w| w[0] < w[1]) {
                return Err(invalid("rank values must be positive and strictly increasing"));
            }
        }
        Ok(())
    }

    /// Grid points along the axes a method uses.
    pub fn points(&self, method: &dyn Method) -> Result<Vec<Hyper>> {
        self.validate()?;
        let axes = method.axes();
        let pick = |on: bool, v: &[f64]| -> Result<Vec<Option<f64>>> {
            if !on {
                return Ok(vec![None]);
            }
            if v.is_empty() {
                return Err(invalid("empty grid axis"));
            }
            Ok(v.iter().copied().map(Some).collect())
        };
        let lambdas = pick(axes.lambda, &self.lambda_values)?;
        let kappas = pick(axes.kappa, &self.kappa_values)?;
        let ranks: Vec<Option<usize>> = if axes.rank {
            match &self.r_values {
                Some(r) if !r.is_empty() => r.iter().copied().map(Some).collect(),
                _ => return Err(invalid("empty rank grid")),
            }
        } else {
            vec![None]
        };
        let mut out = Vec::new();
        for &lambda in &lambdas {
            for &kappa in &kappas {
                for &rank in &ranks {
                    out.push(Hyper { lambda, kappa, rank });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub hyper: Hyper,
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: Hyper,
    pub best_mse: f64,
    pub table: Vec<CvRow>,
}

impl CvResult {
    pub fn to_csv(&self) -> Result<String> {
        let folds = self.table.first().map_or(0, |r| r.fold_mse.len());
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["lambda", "kappa", "rank", "mean_mse"].map(String::from).to_vec();
        header.extend((1..=folds).map(|f| format!("fold{f}")));
        wtr.write_record(&header)?;
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:e}"));
        for row in &self.table {
            let mut rec = vec![
                opt(row.hyper.lambda),
                opt(row.hyper.kappa),
                row.hyper.rank.map_or(String::new(), |r| r.to_string()),
                format!("{:e}", row.mean_mse),
            ];
            rec.extend(row.fold_mse.iter().map(|x| format!("{x:e}")));
            wtr.write_record(&rec)?;
        }
        let bytes = wtr.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Contiguous validation blocks covering `0..n` (earlier folds get the
/// extra rows when `n` is not divisible).
pub fn fold_ranges(n: usize, folds: usize) -> Result<Vec<std::ops::Range<usize>>> {
    if folds < 2 {
        return Err(invalid(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(invalid(format!("{n} design rows cannot fill {folds} folds")));
    }
    let (base, extra) = (n / folds, n % folds);
    let mut start = 0;
    Ok((0..folds)
        .map(|f| {
            let len = base + usize::from(f < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

/// Strictly better score, or tied and more strongly regularized.
fn preferred(a: &CvRow, b: &CvRow) -> bool {
    if a.mean_mse < b.mean_mse - TIE_TOL {
        return true;
    }
    if a.mean_mse > b.mean_mse + TIE_TOL {
        return false;
    }
    let (ha, hb) = (&a.hyper, &b.hyper);
    let lam = ha.lambda.unwrap_or(0.0).total_cmp(&hb.lambda.unwrap_or(0.0));
    if lam.is_ne() {
        return lam.is_gt();
    }
    let kap = ha.kappa.unwrap_or(0.0).total_cmp(&hb.kappa.unwrap_or(0.0));
    if kap.is_ne() {
        return kap.is_lt();
    }
    ha.rank.unwrap_or(0) < hb.rank.unwrap_or(0)
}

/// Groups grid points (by index) into lambda paths: one per (kappa, rank),
/// lambda descending.
pub fn lambda_paths(points: &[Hyper]) -> Vec<Vec<usize>> {
    let mut paths: Vec<Vec<usize>> = Vec::new();
    for (i, h) in points.iter().enumerate() {
        match paths.iter_mut().find(|path| {
            let q = &points[path[0]];
            q.kappa == h.kappa && q.rank == h.rank
        }) {
            Some(path) => path.push(i),
            None => paths.push(vec![i]),
        }
    }
    for path in &mut paths {
        path.sort_by(|&a, &b| {
            let (la, lb) = (points[a].lambda.unwrap_or(0.0), points[b].lambda.unwrap_or(0.0));
            lb.total_cmp(&la).then(a.cmp(&b))
        });
    }
    paths
}

pub fn grid_search_cv(
    design: &LagDesign,
    method: &dyn Method,
    grid: &Grid,
    folds: usize,
    opts: &FitOptions,
) -> Result<CvResult> {
    let points = grid.points(method)?;
    let ranges = fold_ranges(design.n_rows(), folds)?;
    let splits: Vec<_> = ranges
        .iter()
        .map(|r| {
            let train: Vec<usize> = (0..design.n_rows()).filter(|i| !r.contains(i)).collect();
            let valid: Vec<usize> = r.clone().collect();
            (design.select_rows(&train).gram(), design.select_rows(&valid))
        })
        .collect();

    let paths = lambda_paths(&points);
    let mut fold_mse = vec![Vec::with_capacity(folds); points.len()];
    for path in &paths {
        let hypers: Vec<Hyper> = path.iter().map(|&i| points[i]).collect();
        for (gram, valid) in &splits {
            let fits = method.fit_path(gram, &design.names, &hypers, opts)?;
            for (&i, fit) in path.iter().zip(&fits) {
                fold_mse[i].push(mse_from_predictions(&fit.predict(&valid.x)?, &valid.y)?.mse);
            }
        }
    }
    let table: Vec<CvRow> = points
        .into_iter()
        .zip(fold_mse)
        .map(|(hyper, fold_mse)| {
            let mean_mse = fold_mse.iter().sum::<f64>() / folds as f64;
            CvRow { hyper, fold_mse, mean_mse }
        })
        .collect();
    let best_row = table
        .iter()
        .fold(None::<&CvRow>, |best, row| match best {
            Some(b) if !preferred(row, b) => Some(b),
            _ => Some(row),
        })
        .expect("grid has at least one point");
    Ok(CvResult { best: best_row.hyper, best_mse: best_row.mean_mse, table: table.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::build_lag_design;
    use crate::methods::MethodRegistry;
    use crate::panel::TimeSeriesPanel;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn standard_grid_values() {
        let g = Grid::standard(10);
        assert_eq!(g.lambda_values.len(), 10);
        assert_eq!(g.lambda_values[0], 1e-4);
        assert_eq!(g.lambda_values[9], 1.0);
        assert!((g.kappa_values[1] - 0.1).abs() < 1e-15);
        assert!((g.kappa_values[2] - 1.0).abs() < 1e-14);
        assert_eq!(g.r_values, Some(vec![1, 2, 3, 10]));
        assert_eq!(default_ranks(30), vec![1, 2, 3, 8, 30]);
        assert_eq!(default_ranks(2), vec![1, 2]);
    }

    fn design() -> LagDesign {
        let vals = DMatrix::from_fn(60, 3, |i, j| ((i * (j + 2)) as f64 * 0.41).sin() + 0.2 * (i as f64 * 0.1).cos());
        build_lag_design(&TimeSeriesPanel::from_values(vals).unwrap(), 2).unwrap()
    }

    #[test]
    fn single_point_grid() {
        let reg = MethodRegistry::builtin();
        let grid = Grid { lambda_values: vec![0.3], kappa_values: vec![1.0], r_values: None };
        let res = grid_search_cv(&design(), reg.get("scvar").unwrap(), &grid, 5, &FitOptions::default()).unwrap();
        assert_eq!(res.best, Hyper { lambda: Some(0.3), kappa: Some(1.0), rank: None });
        assert_eq!(res.table.len(), 1);
    }

    #[test]
    fn argmin_is_selected() {
        let reg = MethodRegistry::builtin();
        // A huge lasso penalty predicts zero, which is clearly worse here.
        let grid = Grid { lambda_values: vec![1e-3, 1e3], kappa_values: vec![1.0], r_values: None };
        let res = grid_search_cv(&design(), reg.get("lg").unwrap(), &grid, 4, &FitOptions::default()).unwrap();
        assert!(res.table[0].mean_mse < res.table[1].mean_mse);
        assert_eq!(res.best.lambda, Some(1e-3));
    }

    #[test]
    fn ties_prefer_stronger_regularization() {
        let reg = MethodRegistry::builtin();
        // Both penalties kill every coefficient, so the scores tie exactly.
        let grid = Grid { lambda_values: vec![1e3, 1e4], kappa_values: vec![1.0], r_values: None };
        let res = grid_search_cv(&design(), reg.get("glg").unwrap(), &grid, 3, &FitOptions::default()).unwrap();
        assert_eq!(res.table[0].mean_mse, res.table[1].mean_mse);
        assert_eq!(res.best.lambda, Some(1e4));
        let a = CvRow { hyper: Hyper { lambda: Some(1.0), kappa: Some(0.1), rank: Some(2) }, fold_mse: vec![], mean_mse: 1.0 };
        let b = CvRow { hyper: Hyper { lambda: Some(1.0), kappa: Some(1.0), rank: Some(1) }, fold_mse: vec![], mean_mse: 1.0 };
        assert!(preferred(&a, &b));
        let c = CvRow { hyper: Hyper { rank: Some(1), ..a.hyper }, ..a.clone() };
        assert!(preferred(&c, &a));
    }

    #[test]
    fn errors() {
        let reg = MethodRegistry::builtin();
        let empty = Grid { lambda_values: vec![], kappa_values: vec![1.0], r_values: None };
        assert!(grid_search_cv(&design(), reg.get("lg").unwrap(), &empty, 5, &FitOptions::default()).is_err());
        assert!(fold_ranges(3, 5).is_err());
        assert!(fold_ranges(10, 1).is_err());
    }

    #[test]
    fn deterministic_selection() {
        let reg = MethodRegistry::builtin();
        let grid = Grid { lambda_values: vec![1e-3, 1e-1], kappa_values: vec![0.1, 1.0], r_values: None };
        let a = grid_search_cv(&design(), reg.get("scvar").unwrap(), &grid, 3, &FitOptions::default()).unwrap();
        let b = grid_search_cv(&design(), reg.get("scvar").unwrap(), &grid, 3, &FitOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.to_csv().unwrap().starts_with("lambda,kappa,rank,mean_mse,fold1"));
    }

    proptest! {
        #[test]
        fn folds_partition_rows(n in 2usize..200, folds in 2usize..10) {
            prop_assume!(n >= folds);
            let r = fold_ranges(n, folds).unwrap();
            prop_assert_eq!(r.len(), folds);
            prop_assert_eq!(r[0].start, 0);
            prop_assert_eq!(r[folds - 1].end, n);
            for w in r.windows(2) {
                prop_assert_eq!(w[0].end, w[1].start);
            }
            prop_assert!(r.iter().all(|x| !x.is_empty()));
        }
    }
}
