//! The layer-wise sharing graph: which datasets ended up influencing each
//! other after joint training.
//!
//! For one layer-pair index, datasets are nodes and an edge connects `i` and
//! `j` exactly when each is among the other's `k` most influential neighbors
//! (largest influence values, ties broken toward the lower dataset index).

use std::collections::BTreeSet;

/// Mutual top-k influence graph at one layer-pair index.
#[derive(Debug, Clone, PartialEq)]
pub struct SharingGraph {
    /// Zero-based layer-pair index this graph was built from.
    pub layer_pair: usize,
    pub nodes: Vec<usize>,
    /// Unordered edges, stored as (min, max).
    pub edges: BTreeSet<(usize, usize)>,
    /// The influence values the edge rule ran on (n x n).
    pub influence: Vec<Vec<f64>>,
}

impl SharingGraph {
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }
}

/// The `k` most influential neighbors of `i`: larger influence first, ties by
/// lower index.
fn top_k(influence: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
    let n = influence.len();
    let mut neighbors: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    neighbors.sort_by(|&a, &b| {
        influence[i][b]
            .total_cmp(&influence[i][a])
            .then(a.cmp(&b))
    });
    neighbors.truncate(k);
    neighbors
}

/// Builds the mutual top-k graph from a symmetric influence slice.
///
/// `k >= n - 1` makes every pair mutually top-k and the graph complete.
pub fn build_graph(influence: &[Vec<f64>], layer_pair: usize, k: usize) -> SharingGraph {
    let n = influence.len();
    assert!(n >= 2, "a sharing graph needs at least two datasets");
    for row in influence {
        assert_eq!(row.len(), n, "influence slice must be square");
    }
    let tops: Vec<BTreeSet<usize>> = (0..n)
        .map(|i| top_k(influence, i, k).into_iter().collect())
        .collect();
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if tops[i].contains(&j) && tops[j].contains(&i) {
                edges.insert((i, j));
            }
        }
    }
    SharingGraph {
        layer_pair,
        nodes: (0..n).collect(),
        edges,
        influence: influence.to_vec(),
    }
}

fn escape_label(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders the graph as DOT text with sorted, deterministic node and edge
/// ordering. Edge labels carry the influence value.
pub fn export_dot(graph: &SharingGraph, labels: &[String]) -> String {
    assert_eq!(labels.len(), graph.nodes.len(), "one label per node");
    let mut out = String::new();
    out.push_str(&format!("graph sharing_l{} {{\n", graph.layer_pair + 1));
    out.push_str("  node [shape=ellipse];\n");
    for (&node, label) in graph.nodes.iter().zip(labels) {
        out.push_str(&format!("  n{} [label=\"{}\"];\n", node, escape_label(label)));
    }
    for &(i, j) in &graph.edges {
        out.push_str(&format!(
            "  n{} -- n{} [label=\"{:.3}\"];\n",
            i, j, graph.influence[i][j]
        ));
    }
    out.push_str("}\n");
    out
}
