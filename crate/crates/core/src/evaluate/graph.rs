use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::model::VarModel;

/// Default base for the relative block-norm edge rule.
pub const EDGE_THRESHOLD: f64 = 1e-6;

/// Directed graph over series; `adjacency[l][k]` is the edge `l -> k`.
/// Self-loops are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrangerGraph {
    pub names: Vec<String>,
    pub adjacency: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n_edges: usize,
    pub n_leading: usize,
    pub out_degree: Vec<usize>,
}

impl GrangerGraph {
    pub fn empty(names: Vec<String>) -> Self {
        let k = names.len();
        Self { names, adjacency: vec![vec![false; k]; k] }
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn set_edge(&mut self, from: usize, to: usize, present: bool) {
        if from != to {
            self.adjacency[from][to] = present;
        }
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        from != to && self.adjacency[from][to]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let k = self.n_nodes();
        (0..k)
            .flat_map(|l| (0..k).map(move |m| (l, m)))
            .filter(|&(l, m)| self.has_edge(l, m))
            .collect()
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph granger {\n");
        for name in &self.names {
            let _ = writeln!(s, "  \"{}\";", name.replace('"', "\\\""));
        }
        for (l, k) in self.edges() {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\";",
                self.names[l].replace('"', "\\\""),
                self.names[k].replace('"', "\\\"")
            );
        }
        s.push_str("}\n");
        s
    }
}

/// Edge `l -> k` iff `||W block (l,k)|| > threshold * (1 + ||W||_F) / K`.
pub fn granger_graph_from_w(model: &VarModel, threshold: f64) -> Result<GrangerGraph> {
    if !(threshold >= 0.0) {
        return Err(invalid(format!("threshold must be >= 0, got {threshold}")));
    }
    let k = model.n_series();
    let cut = threshold * (1.0 + model.w.norm()) / k as f64;
    let mut g = GrangerGraph::empty(model.names.clone());
    for l in 0..k {
        for m in 0..k {
            if l != m && model.block(l, m).norm() > cut {
                g.set_edge(l, m, true);
            }
        }
    }
    Ok(g)
}

/// Share of correctly classified off-diagonal ordered pairs.
pub fn granger_accuracy(predicted: &GrangerGraph, truth: &GrangerGraph) -> Result<f64> {
    let k = truth.n_nodes();
    if predicted.n_nodes() != k {
        return Err(mismatch(format!("graphs have {} and {k} nodes", predicted.n_nodes())));
    }
    if k < 2 {
        return Err(invalid("accuracy needs at least two nodes"));
    }
    let mut correct = 0usize;
    for l in 0..k {
        for m in 0..k {
            if l != m && predicted.has_edge(l, m) == truth.has_edge(l, m) {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / (k * (k - 1)) as f64)
}

pub fn graph_stats(g: &GrangerGraph) -> GraphStats {
    let k = g.n_nodes();
    let out_degree: Vec<usize> = (0..k).map(|l| (0..k).filter(|&m| g.has_edge(l, m)).count()).collect();
    GraphStats {
        n_edges: out_degree.iter().sum(),
        n_leading: out_degree.iter().filter(|&&d| d >= 1).count(),
        out_degree,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn names(k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("s{i}")).collect()
    }

    fn from_edges(k: usize, edges: &[(usize, usize)]) -> GrangerGraph {
        let mut g = GrangerGraph::empty(names(k));
        for &(a, b) in edges {
            g.set_edge(a, b, true);
        }
        g
    }

    #[test]
    fn graphs_from_w() {
        let z = VarModel::zeros(3, 2);
        assert_eq!(graph_stats(&granger_graph_from_w(&z, EDGE_THRESHOLD).unwrap()).n_edges, 0);
        let diag = VarModel::new(DMatrix::identity(3, 3) * 0.5, 1, names(3)).unwrap();
        let s = graph_stats(&granger_graph_from_w(&diag, EDGE_THRESHOLD).unwrap());
        assert_eq!((s.n_edges, s.n_leading), (0, 0));
        let full = VarModel::new(DMatrix::from_element(4, 4, 0.1), 1, names(4)).unwrap();
        assert_eq!(graph_stats(&granger_graph_from_w(&full, EDGE_THRESHOLD).unwrap()).n_edges, 12);
    }

    #[test]
    fn accuracy_examples() {
        let g = from_edges(3, &[(0, 1)]);
        assert_eq!(granger_accuracy(&g, &g).unwrap(), 1.0);
        let comp = from_edges(3, &[(0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]);
        assert_eq!(granger_accuracy(&comp, &g).unwrap(), 0.0);
        let pred = from_edges(3, &[(0, 1), (0, 2)]);
        assert!((granger_accuracy(&pred, &g).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert!(granger_accuracy(&from_edges(4, &[]), &g).is_err());
    }

    #[test]
    fn stats_examples() {
        let s = graph_stats(&from_edges(4, &[]));
        assert_eq!((s.n_edges, s.n_leading), (0, 0));
        let star = from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let s = graph_stats(&star);
        assert_eq!((s.n_edges, s.n_leading), (4, 1));
        assert_eq!(s.out_degree, vec![4, 0, 0, 0, 0]);
    }

    #[test]
    fn dot_lists_edges() {
        let dot = from_edges(2, &[(1, 0)]).to_dot();
        assert!(dot.contains("\"s2\" -> \"s1\";"));
        assert!(dot.starts_with("digraph"));
    }

    fn graph_strategy() -> impl Strategy<Value = GrangerGraph> {
        (2usize..7).prop_flat_map(|k| {
            proptest::collection::vec(any::<bool>(), k * k).prop_map(move |bits| {
                let mut g = GrangerGraph::empty(names(k));
                for l in 0..k {
                    for m in 0..k {
                        g.set_edge(l, m, bits[l * k + m]);
                    }
                }
                g
            })
        })
    }

    fn relabel(g: &GrangerGraph, perm: &[usize]) -> GrangerGraph {
        let mut out = GrangerGraph::empty(g.names.clone());
        for (l, m) in g.edges() {
            out.set_edge(perm[l], perm[m], true);
        }
        out
    }

    proptest! {
        #[test]
        fn self_accuracy_is_one(g in graph_strategy()) {
            prop_assert_eq!(granger_accuracy(&g, &g).unwrap(), 1.0);
        }

        #[test]
        fn accuracy_invariant_to_relabeling(
            (a, b, perm) in (2usize..7).prop_flat_map(|k| {
                let g = proptest::collection::vec(any::<bool>(), k * k);
                (g.clone(), g, Just((0..k).collect::<Vec<_>>()).prop_shuffle())
            })
        ) {
            let k = perm.len();
            let build = |bits: &[bool]| {
                let mut g = GrangerGraph::empty(names(k));
                for l in 0..k { for m in 0..k { g.set_edge(l, m, bits[l * k + m]); } }
                g
            };
            let (ga, gb) = (build(&a), build(&b));
            let before = granger_accuracy(&ga, &gb).unwrap();
            let after = granger_accuracy(&relabel(&ga, &perm), &relabel(&gb, &perm)).unwrap();
            prop_assert!((before - after).abs() < 1e-15);
        }

        #[test]
        fn threshold_monotone(
            w in proptest::collection::vec(-1.0f64..1.0, 18),
            t1 in 0.0f64..5.0,
            dt in 0.0f64..5.0,
        ) {
            let m = VarModel::new(DMatrix::from_vec(6, 3, w), 2, names(3)).unwrap();
            let lo = graph_stats(&granger_graph_from_w(&m, t1).unwrap()).n_edges;
            let hi = graph_stats(&granger_graph_from_w(&m, t1 + dt).unwrap()).n_edges;
            prop_assert!(hi <= lo);
        }
    }
}
