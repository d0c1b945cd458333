use std::collections::BTreeSet;

use topolstm::model::{slot, AggregatedInputs};
use topolstm::numeric::ParameterStore;
use topolstm::{Cascade, DataGraph, NodeId};

pub fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Element-by-element transcription of the gate equations, independent of
/// the library's matrix helpers.
pub fn scalar_cell(p: &ParameterStore, x: usize, a: &AggregatedInputs) -> (Vec<f64>, Vec<f64>) {
    let d = a.h_p.len();
    let pre = |w: usize, up: usize, uq: usize, b: usize, k: usize| {
        let mut s = p[w].get(k, x) + p[b].get(k, 0);
        for j in 0..d {
            s += p[up].get(k, j) * a.h_p[j];
            s += p[uq].get(k, j) * a.h_q[j];
        }
        s
    };
    let mut h = vec![0.0; d];
    let mut c = vec![0.0; d];
    for k in 0..d {
        let i = sig(pre(slot::W_I, slot::U_I_P, slot::U_I_Q, slot::B_I, k));
        let fp = sig(pre(slot::W_F, slot::U_FP_P, slot::U_FP_Q, slot::B_F, k));
        let fq = sig(pre(slot::W_F, slot::U_FQ_P, slot::U_FQ_Q, slot::B_F, k));
        let cand = pre(slot::W_C, slot::U_C_P, slot::U_C_Q, slot::B_C, k).tanh();
        let o = sig(pre(slot::W_O, slot::U_O_P, slot::U_O_Q, slot::B_O, k));
        c[k] = i * cand + fp * a.c_p[k] + fq * a.c_q[k];
        h[k] = o * c[k].tanh();
    }
    (h, c)
}

/// Edges of the diffusion topology at time `t`, straight from the definition:
/// `(u, v)` is kept when `u` is active and `v` was not active before `u`.
pub fn oracle_edges(graph: &DataGraph, cascade: &Cascade, t: usize) -> BTreeSet<(NodeId, NodeId)> {
    let active = &cascade.nodes()[..t - 1];
    let mut out = BTreeSet::new();
    for (i, &src) in active.iter().enumerate() {
        for dst in graph.nodes() {
            if !graph.has_edge(src, dst) {
                continue;
            }
            let later_or_inactive = match active.iter().position(|&x| x == dst) {
                None => true,
                Some(j) => j > i,
            };
            if later_or_inactive {
                out.insert((src, dst));
            }
        }
    }
    out
}
