use std::collections::BTreeMap;

use super::Matrix;
use crate::error::{Error, Result};
use crate::graph::NodeId;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four independent partial sums so the loop is not one long dependency chain
    let mut acc = [0.0f64; 4];
    let (a4, b4) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (a4.remainder(), b4.remainder());
    for (x, y) in a4.zip(b4) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn add_assign(y: &mut [f64], x: &[f64]) {
    axpy(1.0, x, y);
}

#[inline]
pub fn scale(y: &mut [f64], factor: f64) {
    for v in y {
        *v *= factor;
    }
}

/// Pre-activation `W[:, column] + sum_k U_k v_k + bias` for a one-hot input.
///
/// `terms` carry a name so shape errors point at the offending slot.
pub fn affine(
    name: &str,
    w: &Matrix,
    column: usize,
    terms: &[(&str, &Matrix, &[f64])],
    bias: &[f64],
) -> Result<Vec<f64>> {
    let d = bias.len();
    if w.rows() != d || column >= w.cols() {
        return Err(Error::Shape {
            slot: name.to_owned(),
            expected: (d, column + 1),
            found: w.shape(),
        });
    }
    let mut out = bias.to_vec();
    w.add_column_into(column, &mut out);
    for &(slot, u, v) in terms {
        if u.rows() != d || u.cols() != v.len() {
            return Err(Error::Shape {
                slot: slot.to_owned(),
                expected: (d, v.len()),
                found: u.shape(),
            });
        }
        u.matvec_add(v, &mut out);
    }
    Ok(out)
}

/// Elementwise mean; the empty list pools to the zero vector.
pub fn mean_pool(vectors: &[&[f64]], dim: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dim];
    for v in vectors {
        if v.len() != dim {
            return Err(Error::Shape {
                slot: "mean_pool".into(),
                expected: (dim, 1),
                found: (v.len(), 1),
            });
        }
        add_assign(&mut out, v);
    }
    if !vectors.is_empty() {
        scale(&mut out, 1.0 / vectors.len() as f64);
    }
    Ok(out)
}

/// Max-shifted `log(sum(exp(x)))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Max-shifted softmax of a dense score vector.
pub fn softmax_slice(xs: &[f64]) -> Vec<f64> {
    softmax_with_lse(xs).0
}

/// Softmax together with `log_sum_exp(xs)`, sharing one pass of `exp`.
pub fn softmax_with_lse(xs: &[f64]) -> (Vec<f64>, f64) {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = out.iter().sum();
    scale(&mut out, 1.0 / z);
    (out, m + z.ln())
}

/// Softmax of `scores` restricted to `subset`.
pub fn softmax_over_subset(
    scores: &BTreeMap<NodeId, f64>,
    subset: &[NodeId],
) -> Result<BTreeMap<NodeId, f64>> {
    if subset.is_empty() {
        return Err(Error::arg("softmax over an empty subset"));
    }
    let xs = subset
        .iter()
        .map(|v| {
            scores
                .get(v)
                .copied()
                .ok_or_else(|| Error::arg(format!("no score for node {v}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(subset.iter().copied().zip(softmax_slice(&xs)).collect())
}
