use std::collections::BTreeMap;

use super::{slot, CellState, ScoreMode};
use crate::error::{Error, Result};
use crate::graph::{DiffusionTopology, NodeId};
use crate::numeric::{add_assign, dot, ParameterStore};

/// Mean of `h` over the given positions of the active prefix.
pub(crate) fn pooled_sender(
    states: &[CellState],
    positions: impl IntoIterator<Item = usize>,
    d: usize,
) -> Vec<f64> {
    let mut acc = vec![0.0; d];
    let mut n = 0usize;
    for p in positions {
        add_assign(&mut acc, &states[p].h);
        n += 1;
    }
    if n > 0 {
        let s = 1.0 / n as f64;
        acc.iter_mut().for_each(|x| *x *= s);
    }
    acc
}

/// Activation scores `rho_v` for `candidates`.
///
/// `pooled_all` is the mean sender over all of `states` (all-active mode);
/// `precedents(v)` returns the positions of `P_{v,t}` in `states` and is only
/// consulted in precedent-only mode.
pub(crate) fn candidate_scores<'a, F>(
    params: &ParameterStore,
    states: &[CellState],
    candidates: &[NodeId],
    mode: ScoreMode,
    pooled_all: &[f64],
    precedents: F,
) -> Vec<f64>
where
    F: Fn(NodeId) -> &'a [usize],
{
    let receiver = &params[slot::RECEIVER];
    let bias = params[slot::RECEIVER_BIAS].as_slice();
    let d = receiver.cols();
    match mode {
        ScoreMode::AllActive => candidates
            .iter()
            .map(|&v| dot(pooled_all, receiver.row(v.index())) + bias[v.index()])
            .collect(),
        ScoreMode::PrecedentOnly => candidates
            .iter()
            .map(|&v| {
                let ps = precedents(v);
                if ps.is_empty() {
                    bias[v.index()]
                } else {
                    let pooled = pooled_sender(states, ps.iter().copied(), d);
                    dot(&pooled, receiver.row(v.index())) + bias[v.index()]
                }
            })
            .collect(),
    }
}

/// Scores every node that is inactive in `topo` given the sender states of
/// its active prefix (in activation order).
pub fn score_inactive(
    states: &[CellState],
    topo: &DiffusionTopology,
    params: &ParameterStore,
    mode: ScoreMode,
) -> Result<BTreeMap<NodeId, f64>> {
    let active = topo.active_prefix();
    if active.is_empty() {
        return Err(Error::arg("scoring needs at least one active node"));
    }
    if states.len() != active.len() {
        return Err(Error::Internal(format!(
            "{} cell states for {} active nodes",
            states.len(),
            active.len()
        )));
    }
    let m = params[slot::RECEIVER].rows();
    let candidates: Vec<NodeId> = (0..m)
        .map(NodeId::from_index)
        .filter(|&v| !topo.is_active(v))
        .collect();
    let d = params[slot::RECEIVER].cols();
    let pooled_all = pooled_sender(states, 0..states.len(), d);
    let scores = candidate_scores(params, states, &candidates, mode, &pooled_all, |v| {
        topo.precedent_positions(v)
    });
    Ok(candidates.into_iter().zip(scores).collect())
}
