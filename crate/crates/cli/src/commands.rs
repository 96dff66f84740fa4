use std::path::Path;

use leadvar::baselines::SerializedBaseline;
use leadvar::cv::Grid;
use leadvar::evaluate::{
    granger_graph_from_w, holdout_mse, paired_ttest_onesided, w_to_csv, EvalReport, GrangerGraph, MseSummary,
    Predictor, EDGE_THRESHOLD,
};
use leadvar::experiment::{cv_fit, run_sweep, SweepConfig};
use leadvar::ingest::{load_csv_panel, panel_to_csv, run_pipeline, CsvSchema};
use leadvar::model::{matrix_from_rows, matrix_rows, SerializedVar};
use leadvar::panel::{split_holdout, TransformRecord};
use leadvar::simulate::{make_scenario, simulate_var, ScenarioSpec, SimulationConfig};
use leadvar::{
    build_lag_design, cluster_assignments, holdout_design, BaselineKind, BaselineModel, FitState, FittedModel, Hyper,
    MethodRegistry, TimeSeriesPanel, VarModel,
};
use serde::{Deserialize, Serialize};

use crate::config::{EvaluateConfig, FitConfig, SimulateConfig};
use crate::error::CliError;
use crate::output::OutDir;

pub const MODEL_FILE: &str = "model.json";
pub const TRUE_MODEL_FILE: &str = "true_model.json";
pub const TRUTH_GRAPH_FILE: &str = "truth_graph.json";

pub fn simulate(cfg: &SimulateConfig, out: &mut OutDir) -> Result<(), CliError> {
    if cfg.t_holdout == 0 {
        return Err(CliError::usage("t_holdout must be positive"));
    }
    let scenario = make_scenario(&ScenarioSpec::preset(cfg.scenario, cfg.seed))?;
    let sim = SimulationConfig {
        t: cfg.t_train + cfg.t_holdout,
        burn_in: cfg.burn_in,
        noise_cov: cfg.noise_cov.clone(),
        seed: cfg.seed,
    };
    let panel = simulate_var(&scenario.model, &sim)?;
    let (train, holdout) = split_holdout(&panel, cfg.t_holdout)?;
    out.write("train.csv", panel_to_csv(&train)?)?;
    out.write("holdout.csv", panel_to_csv(&holdout)?)?;
    out.write("true_w.csv", w_to_csv(&scenario.model)?)?;
    out.write_json(TRUE_MODEL_FILE, &scenario.model.to_serializable())?;
    out.write_json(TRUTH_GRAPH_FILE, &scenario.truth)?;
    out.write("truth.dot", scenario.truth.to_dot())?;
    out.write_json("scenario.json", &scenario.spec)?;
    Ok(())
}

/// Coefficients of a saved model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SavedCoefficients {
    Var(SerializedVar),
    Baseline(SerializedBaseline),
}

/// Everything `evaluate` needs: coefficients, the last `p` training rows
/// (lag context for the first holdout point) and the preprocessing to
/// replay on raw holdout data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub method: String,
    pub hyper: Hyper,
    pub p: usize,
    pub names: Vec<String>,
    pub coefficients: SavedCoefficients,
    pub context: Vec<Vec<f64>>,
    pub schema: CsvSchema,
    pub transforms: Vec<TransformRecord>,
}

enum Loaded {
    Var(VarModel),
    Baseline(BaselineModel),
}

impl Loaded {
    fn predictor(&self) -> &dyn Predictor {
        match self {
            Loaded::Var(m) => m,
            Loaded::Baseline(b) => b,
        }
    }

    fn var(&self, names: &[String]) -> Option<Result<VarModel, leadvar::Error>> {
        match self {
            Loaded::Var(m) => Some(Ok(m.clone())),
            Loaded::Baseline(b) => b.as_var(names.to_vec()),
        }
    }
}

impl SavedModel {
    fn load(dir: &Path) -> Result<Self, CliError> {
        read_json(&dir.join(MODEL_FILE))
    }

    fn coefficients(&self) -> Result<Loaded, CliError> {
        Ok(match &self.coefficients {
            SavedCoefficients::Var(v) => Loaded::Var(VarModel::from_serializable(v)?),
            SavedCoefficients::Baseline(b) => Loaded::Baseline(BaselineModel::from_serializable(b)?),
        })
    }

    fn context_panel(&self) -> Result<TimeSeriesPanel, CliError> {
        Ok(TimeSeriesPanel::new(matrix_from_rows(&self.context)?, self.names.clone())?)
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Core(leadvar::Error::InvalidData(format!("{}: {e}", path.display()))))
}

pub fn fit(cfg: &FitConfig, tune: bool, out: &mut OutDir) -> Result<(), CliError> {
    let raw = load_csv_panel(&cfg.data, &cfg.schema)?;
    let panel = run_pipeline(&raw, &cfg.transforms)?;
    let design = build_lag_design(&panel, cfg.p)?;
    let registry = MethodRegistry::builtin();
    let method = registry.get(&cfg.method)?;
    let (cv, fitted) = if tune {
        let grid = cfg.grid.clone().unwrap_or_else(|| Grid::standard(panel.n_series()));
        cv_fit(method, &design, &grid, cfg.folds, &cfg.fit)?
    } else {
        (None, method.fit(&design.gram(), &design.names, &cfg.hyper, &cfg.fit)?)
    };

    if let Some(cv) = &cv {
        out.write("cv_table.csv", cv.to_csv()?)?;
    }
    if let Some(var) = fitted.var_model() {
        out.write("w.csv", w_to_csv(&var)?)?;
    }
    out.write_json("state.json", &state_json(&fitted))?;
    out.write("objective_trace.csv", trace_csv(&fitted))?;
    let coefficients = match &fitted.state {
        FitState::Baseline(b) => SavedCoefficients::Baseline(b.to_serializable()),
        _ => SavedCoefficients::Var(fitted.var_model().expect("structured fits have W").to_serializable()),
    };
    let tail = panel.slice_rows(panel.len() - cfg.p, panel.len())?;
    let saved = SavedModel {
        method: fitted.method.clone(),
        hyper: fitted.hyper,
        p: cfg.p,
        names: panel.names().to_vec(),
        coefficients,
        context: matrix_rows(tail.values()),
        schema: cfg.schema.clone(),
        transforms: panel.transform_log().to_vec(),
    };
    out.write_json(MODEL_FILE, &saved)?;
    Ok(())
}

fn state_json(fitted: &FittedModel) -> serde_json::Value {
    use serde_json::json;
    match &fitted.state {
        FitState::Scvar(s) => json!({
            "method": fitted.method,
            "hyper": fitted.hyper,
            "alpha_bar": s.alpha_bar.as_slice(),
            "gamma": matrix_rows(&s.gamma),
            "v": matrix_rows(&s.v),
            "iterations": s.objective_trace.len(),
            "converged": s.converged,
        }),
        FitState::Mcvar(s) => json!({
            "method": fitted.method,
            "hyper": fitted.hyper,
            "d": matrix_rows(&s.d),
            "g": matrix_rows(&s.g),
            "clusters": cluster_assignments(&s.g),
            "gamma": matrix_rows(&s.gamma),
            "v": matrix_rows(&s.v),
            "iterations": s.objective_trace.len(),
            "converged": s.converged,
            "seeded": s.seeded,
        }),
        FitState::Baseline(b) => json!({
            "method": fitted.method,
            "hyper": fitted.hyper,
            "model": b.to_serializable(),
        }),
    }
}

fn trace_csv(fitted: &FittedModel) -> String {
    let mut s = String::from("iteration,objective,feasibility\n");
    for (i, (o, f)) in fitted.objective_trace().iter().zip(fitted.feasibility_trace()).enumerate() {
        s.push_str(&format!("{},{o},{f}\n", i + 1));
    }
    s
}

struct Scored {
    method: String,
    summary: MseSummary,
}

fn score_model(dir: &Path, holdout_file: &Path) -> Result<(SavedModel, Loaded, Scored), CliError> {
    let saved = SavedModel::load(dir)?;
    let model = saved.coefficients()?;
    let raw = load_csv_panel(holdout_file, &saved.schema)?;
    let holdout = run_pipeline(&raw, &saved.transforms)?;
    let design = holdout_design(&saved.context_panel()?, &holdout, saved.p)?;
    let summary = holdout_mse(model.predictor(), &design)?;
    let scored = Scored { method: saved.method.clone(), summary };
    Ok((saved, model, scored))
}

pub fn evaluate(cfg: &EvaluateConfig, out: &mut OutDir) -> Result<(), CliError> {
    let (saved, model, scored) = score_model(&cfg.model, &cfg.holdout)?;
    let (reference, truth) = match &cfg.truth {
        Some(dir) => {
            let true_model = VarModel::from_serializable(&read_json(&dir.join(TRUE_MODEL_FILE))?)?;
            let truth: GrangerGraph = read_json(&dir.join(TRUTH_GRAPH_FILE))?;
            if true_model.names.len() != saved.names.len() || true_model.p > saved.p {
                return Err(CliError::usage(format!(
                    "truth has K={} p={}, model has K={} p={}",
                    true_model.names.len(),
                    true_model.p,
                    saved.names.len(),
                    saved.p
                )));
            }
            // Same holdout rows, lags taken from the model's stored context.
            let holdout = run_pipeline(&load_csv_panel(&cfg.holdout, &saved.schema)?, &saved.transforms)?;
            let tdesign = holdout_design(&saved.context_panel()?, &holdout, true_model.p)?;
            (holdout_mse(&true_model, &tdesign)?.mse, Some(truth))
        }
        None => {
            let rw = BaselineModel { kind: BaselineKind::Rw, p: 1, w: None, means: None, lambda: None };
            let holdout = run_pipeline(&load_csv_panel(&cfg.holdout, &saved.schema)?, &saved.transforms)?;
            let design = holdout_design(&saved.context_panel()?, &holdout, 1)?;
            (holdout_mse(&rw, &design)?.mse, None)
        }
    };
    let graph = model.var(&saved.names).transpose()?.map(|v| granger_graph_from_w(&v, EDGE_THRESHOLD)).transpose()?;
    let mut report = EvalReport::new(&scored.method, &scored.summary, Some(reference), graph.as_ref(), truth.as_ref())?;
    for dir in &cfg.compare {
        let (_, _, other) = score_model(dir, &cfg.holdout)?;
        let test = paired_ttest_onesided(&scored.summary.per_time, &other.summary.per_time, cfg.alpha)?;
        let mut key = other.method.clone();
        if report.significance.contains_key(&key) {
            key = format!("{key}@{}", dir.display());
        }
        report.significance.insert(key, test.outcome);
    }
    out.write("report.json", report.to_json()? + "\n")?;
    if let Some(g) = &graph {
        out.write_json("graph.json", g)?;
        out.write("graph.dot", g.to_dot())?;
    }
    Ok(())
}

pub fn sweep(cfg: &SweepConfig, out: &mut OutDir) -> Result<(), CliError> {
    let result = run_sweep(cfg, &MethodRegistry::builtin())?;
    out.write("sweep.csv", result.to_csv()?)?;
    out.write_json("sweep.json", &result)?;
    Ok(())
}
