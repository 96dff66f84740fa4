use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::forecast::{relative_mse, MseSummary};
use super::graph::{granger_accuracy, graph_stats, GrangerGraph};
use super::stats::Significance;
use crate::error::Result;
use crate::model::VarModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub n_holdout: usize,
    pub per_series_mse: Vec<f64>,
    pub mse: f64,
    #[serde(default)]
    pub reference_mse: Option<f64>,
    #[serde(default)]
    pub relative_mse: Option<f64>,
    #[serde(default)]
    pub granger_accuracy: Option<f64>,
    pub n_edges: usize,
    pub n_leading: usize,
    pub out_degree: Vec<usize>,
    /// Outcome of the paired test against each named competitor.
    #[serde(default)]
    pub significance: BTreeMap<String, Significance>,
}

impl EvalReport {
    pub fn new(
        method: impl Into<String>,
        summary: &MseSummary,
        reference_mse: Option<f64>,
        graph: Option<&GrangerGraph>,
        truth: Option<&GrangerGraph>,
    ) -> Result<Self> {
        let relative = reference_mse.map(|r| relative_mse(summary.mse, r)).transpose()?;
        let stats = graph.map(graph_stats);
        let accuracy = match (graph, truth) {
            (Some(g), Some(t)) => Some(granger_accuracy(g, t)?),
            _ => None,
        };
        Ok(Self {
            method: method.into(),
            n_holdout: summary.per_time.len(),
            per_series_mse: summary.per_series.clone(),
            mse: summary.mse,
            reference_mse,
            relative_mse: relative,
            granger_accuracy: accuracy,
            n_edges: stats.as_ref().map_or(0, |s| s.n_edges),
            n_leading: stats.as_ref().map_or(0, |s| s.n_leading),
            out_degree: stats.map(|s| s.out_degree).unwrap_or_default(),
            significance: BTreeMap::new(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `W` as a labeled table: one row per input lag (`name_lagL`), one column
/// per forecast target.
pub fn w_to_csv(model: &VarModel) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["input".to_string()];
    header.extend(model.names.iter().cloned());
    wtr.write_record(&header)?;
    for (row, w_row) in model.w.row_iter().enumerate() {
        let (b, l) = (row / model.p, row % model.p + 1);
        let mut rec = vec![format!("{}_lag{l}", model.names[b])];
        rec.extend(w_row.iter().map(|x| format!("{x:e}")));
        wtr.write_record(&rec)?;
    }
    let bytes = wtr.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
