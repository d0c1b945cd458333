//! Static-Bernoulli independent-cascade baseline.
//!
//! Each directed edge gets one activation probability estimated from the
//! training cascades; a candidate's score is the probability that at least
//! one of its active predecessors in the diffusion topology activates it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{Cascade, DataGraph, DiffusionTopology, NodeId, NodeLabels};

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeProbabilities {
    node_count: usize,
    probs: BTreeMap<(NodeId, NodeId), f64>,
}

impl EdgeProbabilities {
    pub fn new(node_count: usize) -> Self {
        EdgeProbabilities {
            node_count,
            probs: BTreeMap::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Probability of `(u, v)`; edges never fitted count as zero.
    pub fn get(&self, u: NodeId, v: NodeId) -> f64 {
        self.probs.get(&(u, v)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, u: NodeId, v: NodeId, p: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::arg(format!("edge probability {p} outside [0, 1]")));
        }
        self.probs.insert((u, v), p);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = ((NodeId, NodeId), f64)> + '_ {
        self.probs.iter().map(|(&k, &p)| (k, p))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Three whitespace-separated columns: `source target probability`.
    pub fn to_text(&self, labels: &NodeLabels) -> String {
        let mut out = String::new();
        for ((u, v), p) in self.iter() {
            let _ = writeln!(out, "{}\t{}\t{p}", labels.label(u), labels.label(v));
        }
        out
    }

    pub fn from_text(text: &str, labels: &NodeLabels) -> Result<Self> {
        let mut probs = EdgeProbabilities::new(labels.len());
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 3 {
                return Err(parse_err(format!(
                    "expected 3 columns, found {}",
                    cols.len()
                )));
            }
            let node = |s: &str| {
                labels
                    .get(s)
                    .ok_or_else(|| Error::UnknownNodes(vec![s.to_owned()]))
            };
            let p: f64 = cols[2]
                .parse()
                .map_err(|_| parse_err(format!("bad probability `{}`", cols[2])))?;
            probs
                .set(node(cols[0])?, node(cols[1])?, p)
                .map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(probs)
    }
}

/// Fits one probability per graph edge `(u, v)`: the number of cascades in
/// which `v` activates after `u`, divided by the number of cascades that
/// contain `u`. Edges whose source never appears get zero.
pub fn fit_static_bernoulli(graph: &DataGraph, cascades: &[Cascade]) -> Result<EdgeProbabilities> {
    let m = graph.node_count();
    let mut contains = vec![0usize; m];
    let mut followed: BTreeMap<(NodeId, NodeId), usize> = BTreeMap::new();
    let mut pos = vec![usize::MAX; m];
    for cascade in cascades {
        cascade.check_in_graph(graph)?;
        for (i, &u) in cascade.nodes().iter().enumerate() {
            pos[u.index()] = i;
            contains[u.index()] += 1;
        }
        for (i, &u) in cascade.nodes().iter().enumerate() {
            for &v in graph.successors(u) {
                let pv = pos[v.index()];
                if pv != usize::MAX && pv > i {
                    *followed.entry((u, v)).or_default() += 1;
                }
            }
        }
        for &u in cascade.nodes() {
            pos[u.index()] = usize::MAX;
        }
    }
    let mut probs = EdgeProbabilities::new(m);
    for (u, v) in graph.edges() {
        let n = contains[u.index()];
        let p = if n == 0 {
            0.0
        } else {
            followed.get(&(u, v)).copied().unwrap_or(0) as f64 / n as f64
        };
        probs.set(u, v, p)?;
    }
    Ok(probs)
}

/// `1 - prod(1 - p(u, v))` over the precedents `u` of `v`; zero without any.
pub fn icsb_score(probs: &EdgeProbabilities, precedents: &[NodeId], v: NodeId) -> f64 {
    let miss: f64 = precedents.iter().map(|&u| 1.0 - probs.get(u, v)).product();
    1.0 - miss
}

/// Scores every inactive node at the topology's current time.
pub fn icsb_scores(
    probs: &EdgeProbabilities,
    topo: &DiffusionTopology,
    node_count: usize,
) -> BTreeMap<NodeId, f64> {
    (0..node_count)
        .map(NodeId::from_index)
        .filter(|&v| !topo.is_active(v))
        .map(|v| (v, icsb_score(probs, &topo.precedents(v), v)))
        .collect()
}
