//! Training-size sweeps: simulate, tune by CV, refit, score on a common
//! holdout, and compare methods with paired tests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cv::{grid_search_cv, lambda_paths, CvResult, Grid};
use crate::design::{build_lag_design, holdout_design, LagDesign};
use crate::error::{invalid, Result};
use crate::evaluate::{
    granger_accuracy, granger_graph_from_w, holdout_mse, paired_ttest_onesided, relative_mse,
    MseSummary, Significance, EDGE_THRESHOLD,
};
use crate::mcvar::cluster_assignments;
use crate::methods::{FitState, FittedModel, Hyper, Method, MethodRegistry};
use crate::panel::TimeSeriesPanel;
use crate::simulate::{make_scenario, simulate_var, Scenario, ScenarioId, ScenarioSpec, SimulationConfig};
use crate::structure::FitOptions;

fn default_methods() -> Vec<String> {
    ["scvar", "mcvar", "ar", "lg", "glg", "mean", "rw"].map(String::from).to_vec()
}

fn default_sizes() -> Vec<usize> {
    vec![30, 50, 75, 100, 200, 500]
}

fn default_folds() -> usize {
    5
}

fn default_alpha() -> f64 {
    0.05
}

fn default_holdout() -> usize {
    500
}

fn default_seeds() -> Vec<u64> {
    (1..=5).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub scenario: ScenarioId,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_holdout")]
    pub t_holdout: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Defaults to [`Grid::standard`] for the scenario's K.
    #[serde(default)]
    pub grid: Option<Grid>,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl SweepConfig {
    pub fn new(scenario: ScenarioId) -> Self {
        Self {
            scenario,
            seeds: default_seeds(),
            sizes: default_sizes(),
            t_holdout: default_holdout(),
            methods: default_methods(),
            folds: default_folds(),
            grid: None,
            fit: FitOptions::default(),
            alpha: default_alpha(),
        }
    }
}

/// One fitted and scored model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub seed: u64,
    pub size: usize,
    pub method: String,
    pub hyper: Hyper,
    pub mse: f64,
    pub relative_mse: f64,
    #[serde(default)]
    pub granger_accuracy: Option<f64>,
    /// Across-series squared error per holdout row.
    pub per_time: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub feasibility_trace: Vec<f64>,
    /// Hard cluster labels for MCVAR fits.
    #[serde(default)]
    pub clusters: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: usize,
    /// Seed-averaged relative MSE per method.
    pub relative_mse: BTreeMap<String, f64>,
    /// For scvar and mcvar: outcome against every other method.
    pub significance: BTreeMap<String, BTreeMap<String, Significance>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub cells: Vec<CellResult>,
    pub rows: Vec<SweepRow>,
}

/// Per-seed data for one scenario: the longest training window followed by
/// the common holdout.
pub struct SeedData {
    pub scenario: Scenario,
    pub train_full: TimeSeriesPanel,
    pub holdout: TimeSeriesPanel,
}

pub fn seed_data(id: ScenarioId, seed: u64, max_size: usize, t_holdout: usize) -> Result<SeedData> {
    let scenario = make_scenario(&ScenarioSpec::preset(id, seed))?;
    let panel = simulate_var(&scenario.model, &SimulationConfig::new(max_size + t_holdout, seed))?;
    let train_full = panel.slice_rows(0, max_size)?;
    let holdout = panel.slice_rows(max_size, max_size + t_holdout)?;
    Ok(SeedData { scenario, train_full, holdout })
}

/// Tunes `method` by CV on `train` and refits it on all of `train`.
pub fn tune_and_fit(
    registry: &MethodRegistry,
    method: &str,
    train: &LagDesign,
    grid: &Grid,
    folds: usize,
    opts: &FitOptions,
) -> Result<FittedModel> {
    Ok(cv_fit(registry.get(method)?, train, grid, folds, opts)?.1)
}

/// CV over `grid` (skipped when it has a single point), then a refit on all
/// of `train` along the same warm-start path CV used.
pub fn cv_fit(
    m: &dyn Method,
    train: &LagDesign,
    grid: &Grid,
    folds: usize,
    opts: &FitOptions,
) -> Result<(Option<CvResult>, FittedModel)> {
    let points = grid.points(m)?;
    let gram = train.gram();
    if points.len() == 1 {
        return Ok((None, m.fit(&gram, &train.names, &points[0], opts)?));
    }
    let cv = grid_search_cv(train, m, grid, folds, opts)?;
    let path = lambda_paths(&points)
        .into_iter()
        .find(|path| path.iter().any(|&i| points[i] == cv.best))
        .expect("best point is on the grid");
    let hypers: Vec<Hyper> = path.iter().map(|&i| points[i]).collect();
    let pos = hypers.iter().position(|h| *h == cv.best).expect("best point is on its path");
    let mut fits = m.fit_path(&gram, &train.names, &hypers, opts)?;
    Ok((Some(cv), fits.swap_remove(pos)))
}

pub fn run_sweep(cfg: &SweepConfig, registry: &MethodRegistry) -> Result<SweepResult> {
    if cfg.sizes.is_empty() || cfg.seeds.is_empty() || cfg.methods.is_empty() {
        return Err(invalid("sweep needs sizes, seeds and methods"));
    }
    for m in &cfg.methods {
        registry.get(m)?;
    }
    let max_size = *cfg.sizes.iter().max().expect("non-empty");
    let mut cells = Vec::new();
    for &seed in &cfg.seeds {
        let data = seed_data(cfg.scenario, seed, max_size, cfg.t_holdout)?;
        let p = data.scenario.spec.p;
        let grid = cfg.grid.clone().unwrap_or_else(|| Grid::standard(data.scenario.spec.k));
        for &size in &cfg.sizes {
            let train = data.train_full.slice_rows(max_size - size, max_size)?;
            let design = build_lag_design(&train, p)?;
            let hold = holdout_design(&train, &data.holdout, p)?;
            let reference = holdout_mse(&data.scenario.model, &hold)?;
            for method in &cfg.methods {
                let fit = tune_and_fit(registry, method, &design, &grid, cfg.folds, &cfg.fit)?;
                cells.push(score(seed, size, &fit, &hold, &reference, &data.scenario)?);
            }
        }
    }
    let rows = summarize(cfg, &cells)?;
    Ok(SweepResult { config: cfg.clone(), cells, rows })
}

fn score(
    seed: u64,
    size: usize,
    fit: &FittedModel,
    hold: &LagDesign,
    reference: &MseSummary,
    scenario: &Scenario,
) -> Result<CellResult> {
    let summary = holdout_mse(fit, hold)?;
    let accuracy = match fit.var_model() {
        Some(var) => Some(granger_accuracy(&granger_graph_from_w(&var, EDGE_THRESHOLD)?, &scenario.truth)?),
        None => None,
    };
    let clusters = match &fit.state {
        FitState::Mcvar(s) => Some(cluster_assignments(&s.g)),
        _ => None,
    };
    Ok(CellResult {
        seed,
        size,
        method: fit.method.clone(),
        hyper: fit.hyper,
        mse: summary.mse,
        relative_mse: relative_mse(summary.mse, reference.mse)?,
        granger_accuracy: accuracy,
        per_time: summary.per_time,
        objective_trace: fit.objective_trace().to_vec(),
        feasibility_trace: fit.feasibility_trace().to_vec(),
        clusters,
    })
}

/// Seed averages and paired tests pooled over seeds.
pub fn summarize(cfg: &SweepConfig, cells: &[CellResult]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        fn of<'a>(cells: &'a [CellResult], size: usize, m: &'a str) -> impl Iterator<Item = &'a CellResult> {
            cells.iter().filter(move |c| c.size == size && c.method == m)
        }
        let mut relative = BTreeMap::new();
        for m in &cfg.methods {
            let v: Vec<f64> = of(cells, size, m).map(|c| c.relative_mse).collect();
            if !v.is_empty() {
                relative.insert(m.clone(), v.iter().sum::<f64>() / v.len() as f64);
            }
        }
        let pooled = |m: &str| -> Vec<f64> { of(cells, size, m).flat_map(|c| c.per_time.iter().copied()).collect() };
        let mut significance = BTreeMap::new();
        for lead in ["scvar", "mcvar"] {
            if !cfg.methods.iter().any(|m| m == lead) {
                continue;
            }
            let a = pooled(lead);
            let mut flags = BTreeMap::new();
            for other in cfg.methods.iter().filter(|m| *m != lead) {
                let b = pooled(other);
                flags.insert(other.clone(), paired_ttest_onesided(&a, &b, cfg.alpha)?.outcome);
            }
            significance.insert(lead.to_string(), flags);
        }
        rows.push(SweepRow { size, relative_mse: relative, significance });
    }
    Ok(rows)
}

impl SweepResult {
    /// One row per training size, one relative-MSE column per method, and a
    /// flag string per structured method (e.g. `ar:+ lg:= ...`).
    pub fn to_csv(&self) -> Result<String> {
        let methods = &self.config.methods;
        let leads: Vec<&str> = ["scvar", "mcvar"]
            .into_iter()
            .filter(|l| methods.iter().any(|m| m == l))
            .collect();
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["size".to_string()];
        header.extend(methods.iter().cloned());
        header.extend(leads.iter().map(|l| format!("{l}_sig")));
        wtr.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.size.to_string()];
            rec.extend(methods.iter().map(|m| row.relative_mse.get(m).map_or(String::new(), |v| format!("{v:.4}"))));
            for l in &leads {
                let flags = row.significance.get(*l).map_or(String::new(), |f| {
                    f.iter().map(|(m, s)| format!("{m}:{s}")).collect::<Vec<_>>().join(" ")
                });
                rec.push(flags);
            }
            wtr.write_record(&rec)?;
        }
        let bytes = wtr.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
