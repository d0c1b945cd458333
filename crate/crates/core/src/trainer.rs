//! Dataset splitting, the regularized objective and mini-batch Adam training.

use std::borrow::{Borrow, Cow};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Cascade, DataGraph, DiffusionTopology};
use crate::model::{
    accumulate_cascade_gradient, forward_with_topology, topology_for_cascade, Model, ModelConfig,
};
use crate::numeric::{Adam, AdamConfig, GradientStore};
use crate::par::{self, Parallelism};

/// Fractions for the two-stage random split: `train_fraction` of all
/// cascades go to training (the rest to test), then `validation_fraction`
/// of those are held out for validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub validation_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.75,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<Cascade>,
    pub validation: Vec<Cascade>,
    pub test: Vec<Cascade>,
}

fn floor_count(n: usize, fraction: f64) -> usize {
    // the epsilon keeps products like 0.3 * 10 from flooring to 2
    ((n as f64) * fraction + 1e-9).floor() as usize
}

/// Shuffles under `seed`, then takes `max(1, floor(n * (1 - train)))` for
/// test and `max(1, floor(n_train * validation))` of the rest for validation.
pub fn split_dataset(cascades: &[Cascade], split: SplitConfig, seed: u64) -> Result<Split> {
    let n = cascades.len();
    if n < 3 {
        return Err(Error::arg(format!(
            "need at least 3 cascades to split, got {n}"
        )));
    }
    for (name, f) in [
        ("train_fraction", split.train_fraction),
        ("validation_fraction", split.validation_fraction),
    ] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::arg(format!("{name} must lie in (0, 1), got {f}")));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n_test = floor_count(n, 1.0 - split.train_fraction).max(1);
    let n_trainval = n - n_test;
    let n_val = floor_count(n_trainval, split.validation_fraction)
        .max(1)
        .min(n_trainval - 1);
    let pick = |idx: &[usize]| idx.iter().map(|&i| cascades[i].clone()).collect::<Vec<_>>();
    Ok(Split {
        test: pick(&order[..n_test]),
        validation: pick(&order[n_test..n_test + n_val]),
        train: pick(&order[n_test + n_val..]),
    })
}

/// A cascade with its full diffusion topology built once up front.
#[derive(Debug, Clone)]
pub struct PreparedCascade {
    pub cascade: Cascade,
    pub topology: DiffusionTopology,
}

/// Builds topologies for every cascade of length at least 2; shorter ones
/// contribute no prediction steps and are dropped. Returns the dropped count.
pub fn prepare_cascades(
    graph: &DataGraph,
    cascades: &[Cascade],
    mode: Parallelism,
) -> Result<(Vec<PreparedCascade>, usize)> {
    let usable: Vec<&Cascade> = cascades.iter().filter(|c| c.len() >= 2).collect();
    let dropped = cascades.len() - usable.len();
    if dropped > 0 {
        log::warn!("ignoring {dropped} cascade(s) of length 1");
    }
    let prepared = par::map_collect(&usable, mode, |c| {
        topology_for_cascade(graph, c).map(|topology| PreparedCascade {
            cascade: (*c).clone(),
            topology,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok((prepared, dropped))
}

/// Value of the regularized objective, split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    /// Mean negative log-likelihood per prediction step.
    pub nll: f64,
    /// `lambda * sum of squared parameter entries`.
    pub regularization: f64,
    pub total: f64,
    pub steps: usize,
}

/// Summed NLL and step count of a set of prepared cascades.
fn nll_sum(model: &Model, items: &[PreparedCascade], mode: Parallelism) -> Result<(f64, usize)> {
    let parts = par::map_collect(items, mode, |p| {
        forward_with_topology(model, p.cascade.nodes(), Cow::Borrowed(&p.topology), false)
            .map(|r| (r.total_loss(), p.cascade.steps()))
    });
    let mut sum = 0.0;
    let mut steps = 0;
    for part in parts {
        let (l, s) = part?;
        sum += l;
        steps += s;
    }
    Ok((sum, steps))
}

pub fn objective_prepared(
    model: &Model,
    items: &[PreparedCascade],
    lambda: f64,
    mode: Parallelism,
) -> Result<ObjectiveValue> {
    let (sum, steps) = nll_sum(model, items, mode)?;
    let nll = if steps > 0 { sum / steps as f64 } else { 0.0 };
    let regularization = lambda * model.params().squared_norm();
    Ok(ObjectiveValue {
        nll,
        regularization,
        total: nll + regularization,
        steps,
    })
}

/// Mean per-step NLL over all cascades plus `lambda` times the squared norm
/// of every parameter. Length-1 cascades are skipped with a warning.
pub fn objective(
    model: &Model,
    graph: &DataGraph,
    cascades: &[Cascade],
    lambda: f64,
) -> Result<ObjectiveValue> {
    if lambda < 0.0 {
        return Err(Error::arg("lambda must be nonnegative"));
    }
    let (items, _) = prepare_cascades(graph, cascades, Parallelism::Sequential)?;
    objective_prepared(model, &items, lambda, Parallelism::Sequential)
}

/// Unnormalized gradient of the summed NLL over `items`, plus the summed NLL
/// and step count.
pub fn summed_gradient<P: Borrow<PreparedCascade> + Sync>(
    model: &Model,
    items: &[P],
    mode: Parallelism,
    ordered: bool,
) -> Result<(GradientStore, f64, usize)> {
    type Acc = Result<(GradientStore, f64, usize)>;
    let zero = || -> Acc { Ok((model.params().zeros_like(), 0.0, 0)) };
    par::fold_reduce(
        items,
        mode,
        ordered,
        zero,
        |acc: Acc, p: &P| {
            let p = p.borrow();
            let (mut g, loss, steps) = acc?;
            let r =
                forward_with_topology(model, p.cascade.nodes(), Cow::Borrowed(&p.topology), false)?;
            accumulate_cascade_gradient(&r, model, 1.0, &mut g)?;
            Ok((g, loss + r.total_loss(), steps + p.cascade.steps()))
        },
        |a: Acc, b: Acc| {
            let (mut ga, la, sa) = a?;
            let (gb, lb, sb) = b?;
            ga.add_assign(&gb);
            Ok((ga, la + lb, sa + sb))
        },
    )
}

/// Gradient of the batch objective: summed NLL gradient divided by the
/// batch's step count, plus `2 * lambda * theta`.
pub fn batch_gradient<P: Borrow<PreparedCascade> + Sync>(
    model: &Model,
    items: &[P],
    lambda: f64,
    mode: Parallelism,
    ordered: bool,
) -> Result<(ObjectiveValue, GradientStore)> {
    let (mut grad, sum, steps) = summed_gradient(model, items, mode, ordered)?;
    if steps == 0 {
        return Err(Error::arg("batch has no prediction steps"));
    }
    grad.scale(1.0 / steps as f64);
    if lambda > 0.0 {
        grad.axpy(2.0 * lambda, model.params());
    }
    let regularization = lambda * model.params().squared_norm();
    let nll = sum / steps as f64;
    Ok((
        ObjectiveValue {
            nll,
            regularization,
            total: nll + regularization,
            steps,
        },
        grad,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub split: SplitConfig,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub deterministic: bool,
    pub parallelism: Parallelism,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1e-6,
            adam: AdamConfig::default(),
            batch_size: 8,
            max_epochs: 200,
            patience: 10,
            seed: 0,
            split: SplitConfig::default(),
            clip_norm: None,
            deterministic: false,
            parallelism: Parallelism::Parallel,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::arg("lambda must be nonnegative"));
        }
        if self.batch_size == 0 {
            return Err(Error::arg("batch size must be positive"));
        }
        if self.adam.learning_rate.is_nan() || self.adam.learning_rate < 0.0 {
            return Err(Error::arg("learning rate must be nonnegative"));
        }
        if let Some(c) = self.clip_norm {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::arg("clip norm must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training objective accumulated over the epoch's batches.
    pub train_loss: f64,
    pub train_nll: f64,
    /// Absent when `lambda` is zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularization: Option<f64>,
    /// Mean per-step NLL on the validation set after the epoch.
    pub validation_loss: f64,
    pub seconds: f64,
}

impl EpochRecord {
    /// `epoch N train_loss X nll Y [reg Z] val_loss V [seconds S]`.
    pub fn log_line(&self, include_timing: bool) -> String {
        let mut line = format!(
            "epoch {} train_loss {:.6} nll {:.6}",
            self.epoch, self.train_loss, self.train_nll
        );
        if let Some(reg) = self.regularization {
            line.push_str(&format!(" reg {reg:.6e}"));
        }
        line.push_str(&format!(" val_loss {:.6}", self.validation_loss));
        if include_timing {
            line.push_str(&format!(" seconds {:.3}", self.seconds));
        }
        line
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub initial_validation_loss: f64,
    /// 0 when no epoch improved on the initial model.
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    /// Mean per-step NLL of the returned model on the training cascades.
    pub final_train_nll: f64,
    pub stopped_early: bool,
    pub dropped_cascades: usize,
    pub train_steps: usize,
    pub validation_steps: usize,
}

impl TrainReport {
    /// JSON form; timings are left out when `include_timing` is false so
    /// reruns with the same seed produce identical bytes.
    pub fn to_json(&self, include_timing: bool) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("report serializes");
        if !include_timing {
            if let Some(epochs) = value.get_mut("epochs").and_then(|e| e.as_array_mut()) {
                for e in epochs {
                    if let Some(obj) = e.as_object_mut() {
                        obj.remove("seconds");
                    }
                }
            }
        }
        value
    }

    /// Losses without wall-clock fields, for reproducibility comparisons.
    pub fn loss_trace(&self) -> Vec<(usize, u64, u64)> {
        self.epochs
            .iter()
            .map(|e| (e.epoch, e.train_loss.to_bits(), e.validation_loss.to_bits()))
            .collect()
    }
}

/// The randomly initialized model that [`train`] starts from.
pub fn initial_model(model_config: ModelConfig, seed: u64) -> Result<Model> {
    Model::new(model_config, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Trains a freshly initialized model (seeded by `config.seed`).
pub fn train(
    graph: &DataGraph,
    train_cascades: &[Cascade],
    validation_cascades: &[Cascade],
    config: &TrainConfig,
    model_config: ModelConfig,
) -> Result<(Model, TrainReport)> {
    let model = initial_model(model_config, config.seed)?;
    train_from(
        model,
        graph,
        train_cascades,
        validation_cascades,
        config,
        |_| {},
    )
}

/// Mini-batch Adam from an existing model. Each epoch shuffles the training
/// cascades, takes one optimizer step per batch, then scores the validation
/// set; the best-validation parameters are returned and training stops after
/// `patience` epochs without improvement.
pub fn train_from(
    mut model: Model,
    graph: &DataGraph,
    train_cascades: &[Cascade],
    validation_cascades: &[Cascade],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Model, TrainReport)> {
    config.validate()?;
    if model.node_count() != graph.node_count() {
        return Err(Error::arg(format!(
            "model has {} nodes but the graph has {}",
            model.node_count(),
            graph.node_count()
        )));
    }
    let mode = config.parallelism;
    let (train_items, dropped_train) = prepare_cascades(graph, train_cascades, mode)?;
    let (val_items, dropped_val) = prepare_cascades(graph, validation_cascades, mode)?;
    if train_items.is_empty() {
        return Err(Error::arg("no training cascades with at least two nodes"));
    }
    let selection_items = if val_items.is_empty() {
        &train_items
    } else {
        &val_items
    };
    let train_steps = train_items.iter().map(|p| p.cascade.steps()).sum();
    let validation_steps = val_items.iter().map(|p| p.cascade.steps()).sum();

    let initial = objective_prepared(&model, selection_items, 0.0, mode)?.nll;
    let mut report = TrainReport {
        epochs: Vec::new(),
        initial_validation_loss: initial,
        best_epoch: 0,
        best_validation_loss: initial,
        final_train_nll: f64::NAN,
        stopped_early: false,
        dropped_cascades: dropped_train + dropped_val,
        train_steps,
        validation_steps,
    };
    let mut best = model.clone();
    let mut adam = Adam::new(config.adam, model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x005E_ED0F_0BDE);
    let mut order: Vec<usize> = (0..train_items.len()).collect();
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut nll_total = 0.0;
        let mut steps_total = 0;
        let mut batch = Vec::with_capacity(config.batch_size);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| &train_items[i]));
            let (value, mut grad) =
                batch_gradient(&model, &batch, config.lambda, mode, config.deterministic)?;
            if !value.total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss: value.total,
                });
            }
            nll_total += value.nll * value.steps as f64;
            steps_total += value.steps;
            if let Some(cap) = config.clip_norm {
                let norm = grad.squared_norm().sqrt();
                if norm > cap {
                    grad.scale(cap / norm);
                }
            }
            adam.step(model.params_mut(), &grad)?;
        }
        if let Some(slot) = model.params().first_non_finite() {
            log::error!("parameter slot `{slot}` became non-finite");
            return Err(Error::Diverged {
                epoch,
                loss: f64::NAN,
            });
        }
        let train_nll = nll_total / steps_total as f64;
        let regularization =
            (config.lambda > 0.0).then(|| config.lambda * model.params().squared_norm());
        let validation_loss = objective_prepared(&model, selection_items, 0.0, mode)?.nll;
        if !validation_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: validation_loss,
            });
        }
        let record = EpochRecord {
            epoch,
            train_loss: train_nll + regularization.unwrap_or(0.0),
            train_nll,
            regularization,
            validation_loss,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!("{}", record.log_line(true));
        on_epoch(&record);
        report.epochs.push(record);

        if validation_loss < report.best_validation_loss {
            report.best_validation_loss = validation_loss;
            report.best_epoch = epoch;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience > 0 && since_best >= config.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    report.final_train_nll = objective_prepared(&best, &train_items, 0.0, mode)?.nll;
    Ok((best, report))
}
