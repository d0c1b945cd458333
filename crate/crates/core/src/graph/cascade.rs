use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use super::{DataGraph, NodeId, NodeLabels};
use crate::error::{Error, Result};

/// Ordered sequence of distinct activated nodes; position `i` (0-based) was
/// activated at time `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cascade {
    nodes: Vec<NodeId>,
}

impl Cascade {
    pub fn new(nodes: Vec<NodeId>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::arg("cascade must contain at least one node"));
        }
        let mut seen = HashSet::with_capacity(nodes.len());
        for &v in &nodes {
            if !seen.insert(v) {
                return Err(Error::arg(format!("node {v} repeats within a cascade")));
            }
        }
        Ok(Cascade { nodes })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Cascade length `T`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of prediction steps (`T - 1`).
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Node activated at time `t` (1-based).
    pub fn at(&self, t: usize) -> NodeId {
        self.nodes[t - 1]
    }

    /// Active nodes strictly before time `t`.
    pub fn prefix(&self, t: usize) -> &[NodeId] {
        &self.nodes[..t - 1]
    }

    pub fn check_in_graph(&self, graph: &DataGraph) -> Result<()> {
        match self.nodes.iter().find(|v| !graph.contains(**v)) {
            Some(v) => Err(Error::Data(format!(
                "cascade node {v} is outside the graph ({} nodes)",
                graph.node_count()
            ))),
            None => Ok(()),
        }
    }
}

/// Parses one cascade per line (labels in activation order). Unknown labels
/// are collected across the whole file and reported together.
pub fn parse_cascades(text: &str, labels: &NodeLabels) -> Result<Vec<Cascade>> {
    let mut cascades = Vec::new();
    let mut unknown = BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut nodes = Vec::new();
        for tok in line.split_whitespace() {
            match labels.get(tok) {
                Some(id) => nodes.push(id),
                None => {
                    unknown.insert(tok.to_owned());
                }
            }
        }
        if !unknown.is_empty() {
            continue;
        }
        let cascade = Cascade::new(nodes).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        cascades.push(cascade);
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownNodes(unknown.into_iter().collect()));
    }
    Ok(cascades)
}

pub fn read_cascades(path: impl AsRef<Path>, labels: &NodeLabels) -> Result<Vec<Cascade>> {
    let text = std::fs::read_to_string(path)?;
    parse_cascades(&text, labels)
}

pub fn format_cascades(cascades: &[Cascade], labels: &NodeLabels) -> String {
    let mut out = String::new();
    for c in cascades {
        let line: Vec<&str> = c.nodes().iter().map(|&v| labels.label(v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}
