//! One-step forecasting, error metrics, Granger graphs and significance
//! tests, plus the serialized evaluation report.

mod forecast;
mod graph;
mod report;
mod stats;

pub use forecast::{
    forecast_one_step, holdout_mse, mse_from_predictions, relative_mse, MseSummary, Predictor,
};
pub use graph::{
    granger_accuracy, granger_graph_from_w, graph_stats, GrangerGraph, GraphStats, EDGE_THRESHOLD,
};
pub use report::{w_to_csv, EvalReport};
pub use stats::{adjusted_rand_index, paired_ttest_onesided, student_t_sf, Significance, TTest};
