use std::borrow::Cow;

use super::cell::{aggregate_from_totals, cell_forward, CellState, CellTrace};
use super::score::candidate_scores;
use super::{Model, ScoreMode};
use crate::error::{Error, Result};
use crate::graph::{Cascade, DataGraph, DiffusionTopology, NodeId};
use crate::numeric::{add_assign, softmax_with_lse};

/// Next-activation prediction at time `t >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub time: usize,
    /// Nodes inactive before `t`, ascending by id.
    pub candidates: Vec<NodeId>,
    pub scores: Vec<f64>,
    pub probs: Vec<f64>,
    /// Mean sender embedding behind all-active scores; empty in
    /// precedent-only mode.
    pub pooled: Vec<f64>,
    /// Index of the true next node in `candidates`, if known.
    pub target: Option<usize>,
    /// `-log p(target)`; zero when there is no target.
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct CascadeForwardResult<'a> {
    pub nodes: Vec<NodeId>,
    pub states: Vec<CellState>,
    pub traces: Vec<CellTrace>,
    /// Precedent positions used by each node's cell.
    pub cell_precedents: Vec<Vec<usize>>,
    pub steps: Vec<StepRecord>,
    pub topology: Cow<'a, DiffusionTopology>,
    pub score_mode: ScoreMode,
}

impl CascadeForwardResult<'_> {
    pub fn losses(&self) -> Vec<f64> {
        self.steps
            .iter()
            .filter(|s| s.target.is_some())
            .map(|s| s.loss)
            .collect()
    }

    pub fn total_loss(&self) -> f64 {
        self.steps.iter().map(|s| s.loss).sum()
    }
}

/// `G*_T` for a cascade, grown one activation at a time from `G*_1`.
pub fn topology_for_cascade(graph: &DataGraph, cascade: &Cascade) -> Result<DiffusionTopology> {
    cascade.check_in_graph(graph)?;
    let mut topo = DiffusionTopology::initial();
    for &v in cascade.prefix(cascade.len()) {
        topo.advance(graph, v)?;
    }
    Ok(topo)
}

/// Teacher-forced pass over a cascade: one cell per node and one prediction
/// step for every `t = 2..=T`, each scored before `v_t`'s own cell runs.
pub fn forward_cascade(
    graph: &DataGraph,
    cascade: &Cascade,
    model: &Model,
) -> Result<CascadeForwardResult<'static>> {
    let topo = topology_for_cascade(graph, cascade)?;
    forward_with_topology(model, cascade.nodes(), Cow::Owned(topo), false)
}

/// Forward pass over `nodes` with a precomputed topology.
///
/// `topo` must be at time `nodes.len()` (training) or `nodes.len() + 1` when
/// `predict_tail` asks for one extra, target-free step after the last node.
pub(crate) fn forward_with_topology<'a>(
    model: &Model,
    nodes: &[NodeId],
    topo: Cow<'a, DiffusionTopology>,
    predict_tail: bool,
) -> Result<CascadeForwardResult<'a>> {
    let params = model.params();
    let (d, m) = (model.hidden_dim(), model.node_count());
    let len = nodes.len();
    let last_step = if predict_tail { len + 1 } else { len };
    if topo.time() != last_step {
        return Err(Error::Internal(format!(
            "topology at time {} for a pass ending at {last_step}",
            topo.time()
        )));
    }
    let mut pos = vec![usize::MAX; m];
    for (i, v) in nodes.iter().enumerate() {
        if v.index() >= m {
            return Err(Error::Data(format!(
                "node {v} is outside the model's {m} nodes"
            )));
        }
        pos[v.index()] = i;
    }

    let mode = model.config().score_mode;
    let mut states: Vec<CellState> = Vec::with_capacity(len);
    let mut traces = Vec::with_capacity(len);
    let mut cell_precedents = Vec::with_capacity(len);
    let mut steps = Vec::with_capacity(last_step.saturating_sub(1));
    // running totals of h and c over the active prefix
    let mut sum_h = vec![0.0; d];
    let mut sum_c = vec![0.0; d];

    for t in 1..=last_step {
        if t >= 2 {
            let candidates: Vec<NodeId> = (0..m)
                .filter(|&v| pos[v] == usize::MAX || pos[v] >= t - 1)
                .map(NodeId::from_index)
                .collect();
            let pooled = match mode {
                ScoreMode::AllActive => {
                    let s = 1.0 / states.len() as f64;
                    sum_h.iter().map(|x| x * s).collect()
                }
                ScoreMode::PrecedentOnly => Vec::new(),
            };
            let scores = candidate_scores(params, &states, &candidates, mode, &pooled, |v| {
                topo.precedent_positions_at(v, t)
            });
            if let Some(bad) = scores.iter().position(|s| !s.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "activation score of node {} at t={t}",
                    candidates[bad]
                )));
            }
            let (probs, lse) = if scores.is_empty() {
                (Vec::new(), 0.0)
            } else {
                softmax_with_lse(&scores)
            };
            let target =
                if t <= len {
                    let v = nodes[t - 1];
                    Some(candidates.binary_search(&v).map_err(|_| {
                        Error::Internal(format!("target {v} missing from candidates"))
                    })?)
                } else {
                    None
                };
            let loss = target.map_or(0.0, |i| (lse - scores[i]).max(0.0));
            steps.push(StepRecord {
                time: t,
                candidates,
                scores,
                probs,
                pooled,
                target,
                loss,
            });
        }
        if t <= len {
            let v = nodes[t - 1];
            let prec = topo.precedent_positions_at(v, t).to_vec();
            let agg = aggregate_from_totals(&states, &prec, &sum_h, &sum_c, d)?;
            let (state, trace) = cell_forward(params, v, &agg)?;
            add_assign(&mut sum_h, &state.h);
            add_assign(&mut sum_c, &state.c);
            states.push(state);
            traces.push(trace);
            cell_precedents.push(prec);
        }
    }

    Ok(CascadeForwardResult {
        nodes: nodes.to_vec(),
        states,
        traces,
        cell_precedents,
        steps,
        topology: topo,
        score_mode: mode,
    })
}

pub(crate) fn predict_next(
    model: &Model,
    graph: &DataGraph,
    prefix: &[NodeId],
) -> Result<Vec<(NodeId, f64)>> {
    if prefix.is_empty() {
        return Err(Error::arg("prediction needs a nonempty prefix"));
    }
    let prefix_cascade = Cascade::new(prefix.to_vec())?;
    prefix_cascade.check_in_graph(graph)?;
    let mut topo = DiffusionTopology::initial();
    for &v in prefix {
        topo.advance(graph, v)?;
    }
    let result = forward_with_topology(model, prefix, Cow::Owned(topo), true)?;
    let step = result
        .steps
        .last()
        .ok_or_else(|| Error::Internal("no prediction step".into()))?;
    let mut ranked: Vec<(NodeId, f64)> = step
        .candidates
        .iter()
        .copied()
        .zip(step.probs.iter().copied())
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}
