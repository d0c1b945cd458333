//! Data graph, node labels, cascades and diffusion topologies.

mod cascade;
mod topology;

pub use cascade::{format_cascades, parse_cascades, read_cascades, Cascade};
pub use topology::{build_topology, extend_topology, DiffusionTopology};

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense, zero-based node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Whether each edge-list line describes one directed edge or a symmetric pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Directedness {
    #[default]
    Directed,
    Undirected,
}

/// Directed graph with sorted, duplicate-free adjacency lists and no self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataGraph {
    out_edges: Vec<Vec<NodeId>>,
    edge_count: usize,
}

impl DataGraph {
    pub fn empty(node_count: usize) -> Self {
        DataGraph {
            out_edges: vec![Vec::new(); node_count],
            edge_count: 0,
        }
    }

    /// Builds a graph from an edge list. Duplicate edges are collapsed and
    /// counted; self-loops and out-of-range endpoints are rejected.
    pub fn from_edges(node_count: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        Self::from_edges_counting(node_count, edges).map(|(g, _)| g)
    }

    /// Like [`DataGraph::from_edges`] but also returns the number of dropped duplicates.
    pub fn from_edges_counting(
        node_count: usize,
        edges: &[(NodeId, NodeId)],
    ) -> Result<(Self, usize)> {
        let mut out_edges = vec![Vec::new(); node_count];
        for &(u, v) in edges {
            if u.index() >= node_count || v.index() >= node_count {
                return Err(Error::arg(format!(
                    "edge ({u}, {v}) references a node outside 0..{node_count}"
                )));
            }
            if u == v {
                return Err(Error::arg(format!("self-loop on node {u}")));
            }
            out_edges[u.index()].push(v);
        }
        let mut edge_count = 0;
        for list in &mut out_edges {
            list.sort_unstable();
            list.dedup();
            edge_count += list.len();
        }
        Ok((
            DataGraph {
                out_edges,
                edge_count,
            },
            edges.len() - edge_count,
        ))
    }

    pub fn node_count(&self) -> usize {
        self.out_edges.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.index() < self.out_edges.len()
    }

    /// Out-neighbours of `u` in ascending id order.
    pub fn successors(&self, u: NodeId) -> &[NodeId] {
        &self.out_edges[u.index()]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.contains(u) && self.out_edges[u.index()].binary_search(&v).is_ok()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.out_edges.len()).map(NodeId::from_index)
    }

    /// All edges ordered by (source, target).
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.out_edges
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (NodeId::from_index(u), v)))
    }

    /// Renders the graph as an edge list using `labels`. Every node is
    /// declared first, in id order, so reloading reproduces the same ids and
    /// keeps isolated nodes.
    pub fn to_edge_list(&self, labels: &NodeLabels) -> String {
        let mut out = String::from("# nodes\n");
        for v in self.nodes() {
            out.push_str(labels.label(v));
            out.push('\n');
        }
        out.push_str("# edges\n");
        for (u, v) in self.edges() {
            out.push_str(labels.label(u));
            out.push(' ');
            out.push_str(labels.label(v));
            out.push('\n');
        }
        out
    }
}

/// Bidirectional map between node labels as they appear in files and dense ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeLabels {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl NodeLabels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Labels `"0"`, `"1"`, ... matching the node ids themselves.
    pub fn identity(node_count: usize) -> Self {
        let mut labels = Self::new();
        for i in 0..node_count {
            labels.intern(&i.to_string());
        }
        labels
    }

    pub fn from_labels(list: Vec<String>) -> Result<Self> {
        let mut labels = Self::new();
        for l in list {
            if labels.index.contains_key(&l) {
                return Err(Error::Data(format!("duplicate node label `{l}`")));
            }
            labels.intern(&l);
        }
        Ok(labels)
    }

    pub fn intern(&mut self, label: &str) -> NodeId {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = NodeId::from_index(self.labels.len());
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    pub fn get(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.labels[id.index()]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.labels
    }

    /// Two-column `id<TAB>label` text.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(&format!("{i}\t{l}\n"));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut list = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, label) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: "expected `id<TAB>label`".into(),
            })?;
            let id: usize = id.trim().parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad node id `{id}`"),
            })?;
            if id != list.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected id {}, found {id}", list.len()),
                });
            }
            list.push(label.to_owned());
        }
        Self::from_labels(list)
    }
}

/// Result of parsing an edge-list file.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: DataGraph,
    pub labels: NodeLabels,
    pub duplicate_edges: usize,
}

/// Parses a whitespace-separated edge list. Blank lines and `#` comments are
/// skipped; a line holding a single label declares a node without edges.
/// Labels are interned in order of first appearance.
pub fn load_graph(text: &str, directedness: Directedness) -> Result<LoadedGraph> {
    let mut labels = NodeLabels::new();
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (src, dst) = match (fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(d), None) => (s, d),
            (Some(node), None, None) => {
                labels.intern(node);
                continue;
            }
            _ => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected `src dst` or a lone node, found `{line}`"),
                })
            }
        };
        if src == dst {
            return Err(Error::SelfLoop {
                line: lineno + 1,
                label: src.to_owned(),
            });
        }
        let u = labels.intern(src);
        let v = labels.intern(dst);
        edges.push((u, v));
        if directedness == Directedness::Undirected {
            edges.push((v, u));
        }
    }
    let (graph, duplicate_edges) = DataGraph::from_edges_counting(labels.len(), &edges)?;
    if duplicate_edges > 0 {
        log::warn!("graph: dropped {duplicate_edges} duplicate edge(s)");
    }
    Ok(LoadedGraph {
        graph,
        labels,
        duplicate_edges,
    })
}

pub fn read_graph(path: impl AsRef<Path>, directedness: Directedness) -> Result<LoadedGraph> {
    let text = std::fs::read_to_string(path)?;
    load_graph(&text, directedness)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_directed_edges() {
        let g = load_graph("a b\nb c\na c\n", Directedness::Directed).unwrap();
        assert_eq!(g.graph.node_count(), 3);
        assert_eq!(g.graph.edge_count(), 3);
        assert_eq!(g.duplicate_edges, 0);
        let a = g.labels.get("a").unwrap();
        let c = g.labels.get("c").unwrap();
        assert!(g.graph.has_edge(a, c));
        assert!(!g.graph.has_edge(c, a));
    }

    #[test]
    fn empty_file() {
        let g = load_graph("", Directedness::Directed).unwrap();
        assert_eq!(g.graph.node_count(), 0);
        assert_eq!(g.graph.edge_count(), 0);
    }

    #[test]
    fn duplicates_collapse() {
        let g = load_graph("# comment\na b\n\na b\n", Directedness::Directed).unwrap();
        assert_eq!(g.graph.edge_count(), 1);
        assert_eq!(g.duplicate_edges, 1);
    }

    #[test]
    fn undirected_expands() {
        let g = load_graph("a b\nb c\n", Directedness::Undirected).unwrap();
        assert_eq!(g.graph.edge_count(), 4);
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = load_graph("a b\nc d e\n", Directedness::Directed).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = load_graph("a b c\n", Directedness::Directed).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn lone_label_declares_isolated_node() {
        let g = load_graph("z\na b\n", Directedness::Directed).unwrap();
        assert_eq!(g.graph.node_count(), 3);
        assert_eq!(g.labels.get("z"), Some(NodeId(0)));
        assert!(g.graph.successors(NodeId(0)).is_empty());
    }

    #[test]
    fn self_loop_rejected() {
        let err = load_graph("a b\nx x\n", Directedness::Directed).unwrap_err();
        assert!(matches!(err, Error::SelfLoop { line: 2, .. }));
    }

    #[test]
    fn labels_tsv_round_trip() {
        let g = load_graph("u7 u3\nu3 zz\n", Directedness::Directed).unwrap();
        let text = g.labels.to_tsv();
        assert_eq!(text, "0\tu7\n1\tu3\n2\tzz\n");
        assert_eq!(NodeLabels::from_tsv(&text).unwrap(), g.labels);
    }
}
