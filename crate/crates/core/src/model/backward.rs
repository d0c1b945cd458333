use std::borrow::Cow;

use super::cell::cell_backward;
use super::forward::CascadeForwardResult;
use super::score::pooled_sender;
use super::{slot, Model, ScoreMode};
use crate::error::{Error, Result};
use crate::numeric::{add_assign, axpy, GradientStore};

/// Exact gradient of `result.total_loss()` with respect to every model slot.
///
/// Walks the cascade backwards. Each `h_i`/`c_i` feeds every later cell's
/// aggregates and every later scoring step, so by the time node `i` is
/// visited its incoming gradient is complete.
pub fn backward_cascade(result: &CascadeForwardResult, model: &Model) -> Result<GradientStore> {
    let mut grads = model.params().zeros_like();
    accumulate_cascade_gradient(result, model, 1.0, &mut grads)?;
    Ok(grads)
}

/// Adds `weight * d(total_loss)/d(params)` into `grads`.
pub(crate) fn accumulate_cascade_gradient(
    result: &CascadeForwardResult,
    model: &Model,
    weight: f64,
    grads: &mut GradientStore,
) -> Result<()> {
    let params = model.params();
    let d = model.hidden_dim();
    let n = result.states.len();
    if result.traces.len() != n || result.cell_precedents.len() != n {
        return Err(Error::Internal("forward traces are incomplete".into()));
    }
    let mut dh = vec![vec![0.0; d]; n];
    let mut dc = vec![vec![0.0; d]; n];
    let receiver = &params[slot::RECEIVER];

    // Gradient owed by every node before the current one: all-active scoring
    // and the other-active aggregate reach every earlier sender equally, so
    // those terms are carried down as running sums instead of being spread
    // eagerly. Precedents, which the other-active mean excludes, get the
    // corresponding amount subtracted.
    let mut carry_h = vec![0.0; d];
    let mut carry_c = vec![0.0; d];

    // steps[k] predicts at time k + 2 and reads states[..k + 1]
    for t in (1..=n).rev() {
        let i = t - 1;
        add_assign(&mut dh[i], &carry_h);
        add_assign(&mut dc[i], &carry_c);
        let g = cell_backward(params, &result.traces[i], &dh[i], &dc[i], grads);
        let prec = &result.cell_precedents[i];
        let agg = &result.traces[i].agg;
        let s_p = if agg.precedent_count > 0 {
            1.0 / agg.precedent_count as f64
        } else {
            0.0
        };
        let s_q = if agg.other_count > 0 {
            1.0 / agg.other_count as f64
        } else {
            0.0
        };
        for &p in prec {
            for k in 0..d {
                dh[p][k] += s_p * g.h_p[k] - s_q * g.h_q[k];
                dc[p][k] += s_p * g.c_p[k] - s_q * g.c_q[k];
            }
        }
        axpy(s_q, &g.h_q, &mut carry_h);
        axpy(s_q, &g.c_q, &mut carry_c);

        if t < 2 {
            continue;
        }
        let Some(step) = result.steps.get(t - 2) else {
            continue;
        };
        let Some(target) = step.target else {
            continue;
        };
        let active = t - 1;
        let states = &result.states[..active];
        let d_scores: Vec<f64> = step
            .probs
            .iter()
            .enumerate()
            .map(|(k, &p)| weight * (if k == target { p - 1.0 } else { p }))
            .collect();

        match result.score_mode {
            ScoreMode::AllActive => {
                let pooled = if step.pooled.len() == d {
                    Cow::Borrowed(&step.pooled)
                } else {
                    Cow::Owned(pooled_sender(states, 0..active, d))
                };
                let mut d_pooled = vec![0.0; d];
                for (&v, &ds) in step.candidates.iter().zip(&d_scores) {
                    axpy(ds, &pooled, grads[slot::RECEIVER].row_mut(v.index()));
                    grads[slot::RECEIVER_BIAS].as_mut_slice()[v.index()] += ds;
                    axpy(ds, receiver.row(v.index()), &mut d_pooled);
                }
                axpy(1.0 / active as f64, &d_pooled, &mut carry_h);
            }
            ScoreMode::PrecedentOnly => {
                for (&v, &ds) in step.candidates.iter().zip(&d_scores) {
                    grads[slot::RECEIVER_BIAS].as_mut_slice()[v.index()] += ds;
                    let ps = result.topology.precedent_positions_at(v, t);
                    if ps.is_empty() {
                        continue;
                    }
                    let pooled = pooled_sender(states, ps.iter().copied(), d);
                    axpy(ds, &pooled, grads[slot::RECEIVER].row_mut(v.index()));
                    let s = ds / ps.len() as f64;
                    for &p in ps {
                        axpy(s, receiver.row(v.index()), &mut dh[p]);
                    }
                }
            }
        }
    }
    Ok(())
}
