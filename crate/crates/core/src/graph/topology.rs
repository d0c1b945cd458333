use std::collections::{BTreeMap, HashMap};

use super::{Cascade, DataGraph, NodeId};
use crate::error::{Error, Result};

/// Possible-activation-attempt DAG of a cascade at time `t`.
///
/// An edge `(v_i, u)` is present iff `(v_i, u)` is a graph edge, `v_i` was
/// active before `t`, and `u` is either still inactive or was activated after
/// `v_i`. Precedents are stored per target as activation positions
/// (0-based), so they are always ordered by activation time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffusionTopology {
    time: usize,
    active: Vec<NodeId>,
    position: HashMap<NodeId, usize>,
    incoming: BTreeMap<NodeId, Vec<usize>>,
    edge_count: usize,
}

impl DiffusionTopology {
    /// Topology at `t = 1`: nothing active, no edges.
    pub fn initial() -> Self {
        DiffusionTopology {
            time: 1,
            active: Vec::new(),
            position: HashMap::new(),
            incoming: BTreeMap::new(),
            edge_count: 0,
        }
    }

    pub fn time(&self) -> usize {
        self.time
    }

    /// `Q_{1:t-1}` in activation order.
    pub fn active_prefix(&self) -> &[NodeId] {
        &self.active
    }

    pub fn is_active(&self, v: NodeId) -> bool {
        self.position.contains_key(&v)
    }

    /// 0-based activation position of an active node.
    pub fn position(&self, v: NodeId) -> Option<usize> {
        self.position.get(&v).copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// All edges, sorted by (source, target).
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut edges: Vec<_> = self
            .incoming
            .iter()
            .flat_map(|(&v, ps)| ps.iter().map(move |&p| (self.active[p], v)))
            .collect();
        edges.sort_unstable();
        edges
    }

    pub fn contains_edge(&self, u: NodeId, v: NodeId) -> bool {
        match (self.position(u), self.incoming.get(&v)) {
            (Some(p), Some(ps)) => ps.binary_search(&p).is_ok(),
            _ => false,
        }
    }

    /// `P_{v,t}` ordered by activation time.
    pub fn precedents(&self, v: NodeId) -> Vec<NodeId> {
        self.precedent_positions(v)
            .iter()
            .map(|&p| self.active[p])
            .collect()
    }

    /// Activation positions of `P_{v,t}`, ascending.
    pub fn precedent_positions(&self, v: NodeId) -> &[usize] {
        self.incoming.get(&v).map_or(&[], Vec::as_slice)
    }

    /// Activation positions of `P_{v,s}` for an earlier time `s <= t`.
    ///
    /// Growth is monotone and edges out of `v_i` appear exactly at time
    /// `i + 1`, so the earlier precedent set is a prefix of the current one.
    pub fn precedent_positions_at(&self, v: NodeId, s: usize) -> &[usize] {
        debug_assert!(s >= 1 && s <= self.time);
        let all = self.precedent_positions(v);
        let cut = all.partition_point(|&p| p + 1 < s);
        &all[..cut]
    }

    /// Targets with a nonempty precedent set, ascending by id.
    pub fn targets(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.incoming.keys().copied()
    }

    /// Moves from time `t` to `t + 1` by activating `next`. Only edges out of
    /// `next` towards currently inactive nodes are added.
    pub fn advance(&mut self, graph: &DataGraph, next: NodeId) -> Result<()> {
        if !graph.contains(next) {
            return Err(Error::arg(format!("node {next} is not in the graph")));
        }
        if self.is_active(next) {
            return Err(Error::arg(format!("node {next} is already active")));
        }
        let pos = self.active.len();
        for &u in graph.successors(next) {
            if !self.is_active(u) {
                self.incoming.entry(u).or_default().push(pos);
                self.edge_count += 1;
            }
        }
        self.active.push(next);
        self.position.insert(next, pos);
        self.time += 1;
        Ok(())
    }
}

/// Builds `G*_t` from scratch for `1 <= t <= T`.
pub fn build_topology(graph: &DataGraph, cascade: &Cascade, t: usize) -> Result<DiffusionTopology> {
    if t == 0 || t > cascade.len() {
        return Err(Error::arg(format!(
            "time {t} outside 1..={} for this cascade",
            cascade.len()
        )));
    }
    cascade.check_in_graph(graph)?;
    let active = cascade.prefix(t).to_vec();
    let position: HashMap<NodeId, usize> =
        active.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut incoming: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    let mut edge_count = 0;
    for (i, &src) in active.iter().enumerate() {
        for &u in graph.successors(src) {
            let admissible = match position.get(&u) {
                None => true,
                Some(&j) => j > i,
            };
            if admissible {
                incoming.entry(u).or_default().push(i);
                edge_count += 1;
            }
        }
    }
    Ok(DiffusionTopology {
        time: t,
        active,
        position,
        incoming,
        edge_count,
    })
}

/// Returns `G*_{t+1}` given `G*_t` and the node activated at `t`.
pub fn extend_topology(
    topo: &DiffusionTopology,
    graph: &DataGraph,
    next_active: NodeId,
) -> Result<DiffusionTopology> {
    let mut next = topo.clone();
    next.advance(graph, next_active)?;
    Ok(next)
}
