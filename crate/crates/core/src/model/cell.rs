use super::slot;
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::numeric::{add_assign, affine, sigmoid, GradientStore, ParameterStore};

/// Sender embedding `h` and memory cell `c` of one active node.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

/// Mean-pooled inputs from the precedent set (`p`) and from the remaining
/// active nodes (`q`). Empty sets pool to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedInputs {
    pub h_p: Vec<f64>,
    pub h_q: Vec<f64>,
    pub c_p: Vec<f64>,
    pub c_q: Vec<f64>,
    pub precedent_count: usize,
    pub other_count: usize,
}

impl AggregatedInputs {
    pub fn zeros(d: usize) -> Self {
        AggregatedInputs {
            h_p: vec![0.0; d],
            h_q: vec![0.0; d],
            c_p: vec![0.0; d],
            c_q: vec![0.0; d],
            precedent_count: 0,
            other_count: 0,
        }
    }
}

/// Everything the backward pass needs from one cell evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTrace {
    pub node: NodeId,
    pub agg: AggregatedInputs,
    pub input: Vec<f64>,
    pub forget_p: Vec<f64>,
    pub forget_q: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// Pools `states[..]` into precedent and other-active aggregates.
///
/// `states` holds the active prefix in activation order and `precedents`
/// are ascending positions into it.
pub fn aggregate(states: &[CellState], precedents: &[usize], d: usize) -> Result<AggregatedInputs> {
    let mut agg = AggregatedInputs::zeros(d);
    let mut is_precedent = vec![false; states.len()];
    for &p in precedents {
        let slot = is_precedent.get_mut(p).ok_or_else(|| {
            Error::Internal(format!(
                "precedent position {p} has no cell state ({} active)",
                states.len()
            ))
        })?;
        *slot = true;
    }
    for (state, &prec) in states.iter().zip(&is_precedent) {
        if state.h.len() != d || state.c.len() != d {
            return Err(Error::Internal("cell state has the wrong width".into()));
        }
        if prec {
            add_assign(&mut agg.h_p, &state.h);
            add_assign(&mut agg.c_p, &state.c);
            agg.precedent_count += 1;
        } else {
            add_assign(&mut agg.h_q, &state.h);
            add_assign(&mut agg.c_q, &state.c);
            agg.other_count += 1;
        }
    }
    if agg.precedent_count > 0 {
        let s = 1.0 / agg.precedent_count as f64;
        agg.h_p
            .iter_mut()
            .chain(agg.c_p.iter_mut())
            .for_each(|x| *x *= s);
    }
    if agg.other_count > 0 {
        let s = 1.0 / agg.other_count as f64;
        agg.h_q
            .iter_mut()
            .chain(agg.c_q.iter_mut())
            .for_each(|x| *x *= s);
    }
    Ok(agg)
}

/// Same result as [`aggregate`] up to rounding, in time proportional to the
/// precedent count: `sum_h`/`sum_c` hold the totals over all of `states`, and
/// the other-active means are taken as the total minus the precedent part.
pub(crate) fn aggregate_from_totals(
    states: &[CellState],
    precedents: &[usize],
    sum_h: &[f64],
    sum_c: &[f64],
    d: usize,
) -> Result<AggregatedInputs> {
    let mut agg = AggregatedInputs::zeros(d);
    for &p in precedents {
        let state = states.get(p).ok_or_else(|| {
            Error::Internal(format!(
                "precedent position {p} has no cell state ({} active)",
                states.len()
            ))
        })?;
        add_assign(&mut agg.h_p, &state.h);
        add_assign(&mut agg.c_p, &state.c);
    }
    agg.precedent_count = precedents.len();
    agg.other_count = states.len() - precedents.len();
    if agg.other_count > 0 {
        let s = 1.0 / agg.other_count as f64;
        for k in 0..d {
            agg.h_q[k] = (sum_h[k] - agg.h_p[k]) * s;
            agg.c_q[k] = (sum_c[k] - agg.c_p[k]) * s;
        }
    }
    if agg.precedent_count > 0 {
        let s = 1.0 / agg.precedent_count as f64;
        agg.h_p
            .iter_mut()
            .chain(agg.c_p.iter_mut())
            .for_each(|x| *x *= s);
    }
    Ok(agg)
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name.to_owned()))
    }
}

fn gate(
    params: &ParameterStore,
    node: NodeId,
    w: usize,
    u_p: usize,
    u_q: usize,
    b: usize,
    agg: &AggregatedInputs,
) -> Result<Vec<f64>> {
    affine(
        params.name(w),
        &params[w],
        node.index(),
        &[
            (params.name(u_p), &params[u_p], &agg.h_p),
            (params.name(u_q), &params[u_q], &agg.h_q),
        ],
        params[b].as_slice(),
    )
}

/// One Topo-LSTM cell step for `node` given its pooled inputs.
pub fn cell_forward(
    params: &ParameterStore,
    node: NodeId,
    agg: &AggregatedInputs,
) -> Result<(CellState, CellTrace)> {
    use slot::*;
    let mut input = gate(params, node, W_I, U_I_P, U_I_Q, B_I, agg)?;
    input.iter_mut().for_each(|x| *x = sigmoid(*x));
    check_finite("input gate", &input)?;

    let mut forget_p = gate(params, node, W_F, U_FP_P, U_FP_Q, B_F, agg)?;
    forget_p.iter_mut().for_each(|x| *x = sigmoid(*x));
    check_finite("precedent forget gate", &forget_p)?;

    let mut forget_q = gate(params, node, W_F, U_FQ_P, U_FQ_Q, B_F, agg)?;
    forget_q.iter_mut().for_each(|x| *x = sigmoid(*x));
    check_finite("other-active forget gate", &forget_q)?;

    let mut candidate = gate(params, node, W_C, U_C_P, U_C_Q, B_C, agg)?;
    candidate.iter_mut().for_each(|x| *x = x.tanh());
    check_finite("candidate cell", &candidate)?;

    let mut output = gate(params, node, W_O, U_O_P, U_O_Q, B_O, agg)?;
    output.iter_mut().for_each(|x| *x = sigmoid(*x));
    check_finite("output gate", &output)?;

    let d = input.len();
    let c: Vec<f64> = (0..d)
        .map(|k| input[k] * candidate[k] + forget_p[k] * agg.c_p[k] + forget_q[k] * agg.c_q[k])
        .collect();
    check_finite("memory cell", &c)?;
    let tanh_c: Vec<f64> = c.iter().map(|x| x.tanh()).collect();
    let h: Vec<f64> = output.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();

    let trace = CellTrace {
        node,
        agg: agg.clone(),
        input,
        forget_p,
        forget_q,
        candidate,
        output,
        tanh_c,
    };
    Ok((CellState { h, c }, trace))
}

/// Gradients flowing back into the four aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateGrads {
    pub h_p: Vec<f64>,
    pub h_q: Vec<f64>,
    pub c_p: Vec<f64>,
    pub c_q: Vec<f64>,
}

fn accumulate_gate(
    params: &ParameterStore,
    grads: &mut GradientStore,
    node: NodeId,
    (w, u_p, u_q, b): (usize, usize, usize, usize),
    delta: &[f64],
    agg: &AggregatedInputs,
    out: &mut AggregateGrads,
) {
    grads[w].add_to_column(node.index(), delta);
    add_assign(grads[b].as_mut_slice(), delta);
    grads[u_p].add_outer(delta, &agg.h_p);
    grads[u_q].add_outer(delta, &agg.h_q);
    params[u_p].matvec_t_add(delta, &mut out.h_p);
    params[u_q].matvec_t_add(delta, &mut out.h_q);
}

/// Backpropagates `dh`, `dc` (total gradients w.r.t. this cell's outputs)
/// into `grads` and returns the gradients w.r.t. the aggregates.
pub fn cell_backward(
    params: &ParameterStore,
    trace: &CellTrace,
    dh: &[f64],
    dc_in: &[f64],
    grads: &mut GradientStore,
) -> AggregateGrads {
    use slot::*;
    let d = dh.len();
    let agg = &trace.agg;
    let mut d_input = vec![0.0; d];
    let mut d_fp = vec![0.0; d];
    let mut d_fq = vec![0.0; d];
    let mut d_cand = vec![0.0; d];
    let mut d_out = vec![0.0; d];
    let mut out = AggregateGrads {
        h_p: vec![0.0; d],
        h_q: vec![0.0; d],
        c_p: vec![0.0; d],
        c_q: vec![0.0; d],
    };
    for k in 0..d {
        let o = trace.output[k];
        let tc = trace.tanh_c[k];
        let dc = dc_in[k] + dh[k] * o * (1.0 - tc * tc);
        let (i, fp, fq, cc) = (
            trace.input[k],
            trace.forget_p[k],
            trace.forget_q[k],
            trace.candidate[k],
        );
        d_out[k] = dh[k] * tc * o * (1.0 - o);
        d_input[k] = dc * cc * i * (1.0 - i);
        d_cand[k] = dc * i * (1.0 - cc * cc);
        d_fp[k] = dc * agg.c_p[k] * fp * (1.0 - fp);
        d_fq[k] = dc * agg.c_q[k] * fq * (1.0 - fq);
        out.c_p[k] = dc * fp;
        out.c_q[k] = dc * fq;
    }
    let node = trace.node;
    accumulate_gate(
        params,
        grads,
        node,
        (W_I, U_I_P, U_I_Q, B_I),
        &d_input,
        agg,
        &mut out,
    );
    accumulate_gate(
        params,
        grads,
        node,
        (W_F, U_FP_P, U_FP_Q, B_F),
        &d_fp,
        agg,
        &mut out,
    );
    accumulate_gate(
        params,
        grads,
        node,
        (W_F, U_FQ_P, U_FQ_Q, B_F),
        &d_fq,
        agg,
        &mut out,
    );
    accumulate_gate(
        params,
        grads,
        node,
        (W_C, U_C_P, U_C_Q, B_C),
        &d_cand,
        agg,
        &mut out,
    );
    accumulate_gate(
        params,
        grads,
        node,
        (W_O, U_O_P, U_O_Q, B_O),
        &d_out,
        agg,
        &mut out,
    );
    out
}
