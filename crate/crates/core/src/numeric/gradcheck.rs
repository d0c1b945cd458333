use rand::Rng;

use super::{GradientStore, ParameterStore};
use crate::error::{Error, Result};

/// Worst coordinate found by [`finite_difference_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_slot: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub samples: usize,
}

/// Compares `analytic` against central differences of `loss` at `samples`
/// randomly chosen coordinates.
///
/// A slot is drawn uniformly first and then a coordinate inside it, so small
/// slots such as biases are checked as often as the wide embedding matrices.
/// Relative error is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn finite_difference_check<F, R>(
    loss: F,
    params: &ParameterStore,
    analytic: &GradientStore,
    samples: usize,
    h: f64,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    F: Fn(&ParameterStore) -> Result<f64>,
    R: Rng + ?Sized,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::arg("finite-difference step must be positive"));
    }
    params.check_congruent(analytic)?;
    if params.coordinate_count() == 0 {
        return Err(Error::arg("no coordinates to check"));
    }
    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_slot: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        samples,
    };
    let nonempty: Vec<usize> = (0..params.len())
        .filter(|&i| !params[i].as_slice().is_empty())
        .collect();
    for _ in 0..samples {
        let slot = nonempty[rng.gen_range(0..nonempty.len())];
        let idx = rng.gen_range(0..params[slot].as_slice().len());
        let original = params[slot].as_slice()[idx];

        work[slot].as_mut_slice()[idx] = original + h;
        let plus = loss(&work)?;
        work[slot].as_mut_slice()[idx] = original - h;
        let minus = loss(&work)?;
        work[slot].as_mut_slice()[idx] = original;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss while perturbing `{}`[{idx}]",
                params.name(slot)
            )));
        }

        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[slot].as_slice()[idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > report.max_relative_error || report.worst_slot.is_empty() {
            report.max_relative_error = rel;
            report.worst_slot = params.name(slot).to_owned();
            report.worst_index = idx;
            report.analytic = a;
            report.numeric = numeric;
        }
    }
    Ok(report)
}
