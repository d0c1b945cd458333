//! Next-node ranking evaluation: Hits@k and MAP@k pooled over every
//! prediction step of every test cascade.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Cascade, DataGraph, DiffusionTopology, NodeId};
use crate::icsb::{icsb_score, EdgeProbabilities};
use crate::model::{forward_cascade, Model};
use crate::par::{self, Parallelism};

pub const DEFAULT_KS: [usize; 3] = [10, 50, 100];

/// Scores of every candidate (inactive node) at one prediction step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepScores {
    /// Ascending by id.
    pub candidates: Vec<NodeId>,
    pub scores: Vec<f64>,
    /// Index of the true next node in `candidates`.
    pub target: usize,
}

/// Anything that can score the candidates at each step of a cascade.
pub trait NextNodeScorer: Sync {
    /// One entry per step `t = 2..=T`.
    fn step_scores(&self, graph: &DataGraph, cascade: &Cascade) -> Result<Vec<StepScores>>;
}

impl NextNodeScorer for Model {
    fn step_scores(&self, graph: &DataGraph, cascade: &Cascade) -> Result<Vec<StepScores>> {
        let result = forward_cascade(graph, cascade, self)?;
        result
            .steps
            .into_iter()
            .map(|s| {
                let target = s
                    .target
                    .ok_or_else(|| Error::Internal("training step without target".into()))?;
                Ok(StepScores {
                    candidates: s.candidates,
                    scores: s.scores,
                    target,
                })
            })
            .collect()
    }
}

/// The static-Bernoulli IC baseline as a scorer.
#[derive(Debug, Clone)]
pub struct IcsbScorer {
    pub probs: EdgeProbabilities,
}

impl NextNodeScorer for IcsbScorer {
    fn step_scores(&self, graph: &DataGraph, cascade: &Cascade) -> Result<Vec<StepScores>> {
        cascade.check_in_graph(graph)?;
        let m = graph.node_count();
        let mut topo = DiffusionTopology::initial();
        let mut out = Vec::with_capacity(cascade.steps());
        for (i, &next) in cascade.nodes().iter().enumerate() {
            if i > 0 {
                let candidates: Vec<NodeId> = (0..m)
                    .map(NodeId::from_index)
                    .filter(|&v| !topo.is_active(v))
                    .collect();
                let scores = candidates
                    .iter()
                    .map(|&v| icsb_score(&self.probs, &topo.precedents(v), v))
                    .collect();
                let target = candidates
                    .binary_search(&next)
                    .map_err(|_| Error::Internal(format!("target {next} is not a candidate")))?;
                out.push(StepScores {
                    candidates,
                    scores,
                    target,
                });
            }
            topo.advance(graph, next)?;
        }
        Ok(out)
    }
}

fn by_score_then_id(a: (NodeId, f64), b: (NodeId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Candidates ordered by descending score, ties broken by ascending id.
pub fn rank_candidates(scores: &BTreeMap<NodeId, f64>) -> Vec<NodeId> {
    let mut items: Vec<(NodeId, f64)> = scores.iter().map(|(&v, &s)| (v, s)).collect();
    items.sort_by(|&a, &b| by_score_then_id(a, b));
    items.into_iter().map(|(v, _)| v).collect()
}

/// 1-based position of `candidates[target]` under [`rank_candidates`]'
/// ordering, computed without sorting.
pub fn rank_of_target(candidates: &[NodeId], scores: &[f64], target: usize) -> usize {
    let t = (candidates[target], scores[target]);
    1 + candidates
        .iter()
        .zip(scores)
        .filter(|&(&v, &s)| by_score_then_id((v, s), t) == Ordering::Less)
        .count()
}

pub fn hits_at_k(rank: usize, k: usize) -> f64 {
    if rank >= 1 && rank <= k {
        1.0
    } else {
        0.0
    }
}

/// Average precision truncated at `k` with a single relevant item.
pub fn map_at_k(rank: usize, k: usize) -> f64 {
    if rank >= 1 && rank <= k {
        1.0 / rank as f64
    } else {
        0.0
    }
}

/// Metrics averaged over all pooled prediction instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub ks: Vec<usize>,
    pub hits: Vec<f64>,
    pub map: Vec<f64>,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub metric: String,
    pub k: usize,
    pub value: f64,
    pub percent: f64,
}

impl MetricsTable {
    /// Builds a table from target ranks.
    pub fn from_ranks(ranks: &[usize], ks: &[usize]) -> Self {
        let n = ranks.len().max(1) as f64;
        let mean =
            |f: fn(usize, usize) -> f64, k: usize| ranks.iter().map(|&r| f(r, k)).sum::<f64>() / n;
        MetricsTable {
            ks: ks.to_vec(),
            hits: ks.iter().map(|&k| mean(hits_at_k, k)).collect(),
            map: ks.iter().map(|&k| mean(map_at_k, k)).collect(),
            instances: ranks.len(),
        }
    }

    pub fn hits_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.hits[i])
    }

    pub fn map_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.map[i])
    }

    pub fn entries(&self) -> Vec<MetricEntry> {
        let mut out = Vec::new();
        for (name, values) in [("MAP", &self.map), ("Hits", &self.hits)] {
            for (&k, &value) in self.ks.iter().zip(values.iter()) {
                out.push(MetricEntry {
                    metric: name.to_owned(),
                    k,
                    value,
                    percent: value * 100.0,
                });
            }
        }
        out
    }

    /// Aligned table in percent, one row per scorer, MAP columns then Hits
    /// columns.
    pub fn format_table(rows: &[(&str, &MetricsTable)]) -> String {
        let Some((_, first)) = rows.first() else {
            return String::new();
        };
        let name_width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = write!(out, "{:<name_width$}", "Method");
        for metric in ["MAP", "Hits"] {
            for k in &first.ks {
                let _ = write!(out, "  {:>10}", format!("{metric}@{k}(%)"));
            }
        }
        out.push('\n');
        for (name, table) in rows {
            let _ = write!(out, "{name:<name_width$}");
            for v in table.map.iter().chain(table.hits.iter()) {
                let _ = write!(out, "  {:>10.3}", v * 100.0);
            }
            out.push('\n');
        }
        out
    }
}

/// Rank of the target at every step of every cascade, with the cascade
/// length of each instance, in input order.
pub fn collect_ranks<S: NextNodeScorer + ?Sized>(
    scorer: &S,
    graph: &DataGraph,
    cascades: &[Cascade],
    mode: Parallelism,
) -> Result<Vec<(usize, usize)>> {
    let per_cascade = par::map_collect(cascades, mode, |c| -> Result<Vec<(usize, usize)>> {
        let steps = scorer.step_scores(graph, c)?;
        Ok(steps
            .iter()
            .map(|s| (c.len(), rank_of_target(&s.candidates, &s.scores, s.target)))
            .collect())
    });
    let mut out = Vec::new();
    for part in per_cascade {
        out.extend(part?);
    }
    Ok(out)
}

fn check_ks(ks: &[usize]) -> Result<()> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::arg(
            "ks must be a nonempty list of positive integers",
        ));
    }
    Ok(())
}

/// Pools one instance per step `t = 2..=T` of every test cascade and
/// averages the metrics over all instances (micro-average).
pub fn evaluate<S: NextNodeScorer + ?Sized>(
    scorer: &S,
    graph: &DataGraph,
    cascades: &[Cascade],
    ks: &[usize],
    mode: Parallelism,
) -> Result<MetricsTable> {
    Ok(evaluate_detailed(scorer, graph, cascades, ks, mode)?.overall)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetailedMetrics {
    pub overall: MetricsTable,
    /// Metrics per cascade length.
    pub by_length: BTreeMap<usize, MetricsTable>,
}

impl DetailedMetrics {
    /// CSV with one row per (cascade length, metric, k).
    pub fn length_csv(&self) -> String {
        let mut out = String::from("cascade_length,instances,metric,k,value\n");
        for (len, table) in &self.by_length {
            for e in table.entries() {
                let _ = writeln!(
                    out,
                    "{len},{},{},{},{}",
                    table.instances, e.metric, e.k, e.value
                );
            }
        }
        out
    }
}

pub fn evaluate_detailed<S: NextNodeScorer + ?Sized>(
    scorer: &S,
    graph: &DataGraph,
    cascades: &[Cascade],
    ks: &[usize],
    mode: Parallelism,
) -> Result<DetailedMetrics> {
    check_ks(ks)?;
    let usable: Vec<Cascade> = cascades.iter().filter(|c| c.len() >= 2).cloned().collect();
    if usable.len() < cascades.len() {
        log::warn!(
            "skipping {} test cascade(s) of length 1",
            cascades.len() - usable.len()
        );
    }
    if usable.is_empty() {
        return Err(Error::arg("no test cascades with at least two nodes"));
    }
    let ranked = collect_ranks(scorer, graph, &usable, mode)?;
    let ranks: Vec<usize> = ranked.iter().map(|&(_, r)| r).collect();
    let mut grouped: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(len, r) in &ranked {
        grouped.entry(len).or_default().push(r);
    }
    Ok(DetailedMetrics {
        overall: MetricsTable::from_ranks(&ranks, ks),
        by_length: grouped
            .into_iter()
            .map(|(len, rs)| (len, MetricsTable::from_ranks(&rs, ks)))
            .collect(),
    })
}
