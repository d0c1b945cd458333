//! Synthetic datasets: random graphs plus independent-cascade simulations.

use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{format_cascades, Cascade, DataGraph, NodeId, NodeLabels};
use crate::icsb::EdgeProbabilities;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphModel {
    /// Directed edges drawn uniformly without replacement.
    UniformRandomEdges,
    /// Barabási–Albert growth; every edge is added in both directions.
    PreferentialAttachment,
    /// `0 -> 1 -> ... -> n-1`.
    Chain,
    /// Square lattice filled row by row, 4-neighbourhood in both directions.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeParam {
    /// Fraction of the `n(n-1)` possible directed edges.
    Density(f64),
    EdgeCount(usize),
    /// Edges per arriving node under preferential attachment.
    Attachment(usize),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationProb {
    Fixed(f64),
    /// Each edge draws its own probability uniformly from `[lo, hi]`.
    Uniform {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub node_count: usize,
    pub graph_model: GraphModel,
    pub edge_param: EdgeParam,
    pub activation: ActivationProb,
    pub cascade_count: usize,
    pub max_cascade_length: usize,
    pub seed: u64,
    /// Redraws allowed per cascade when a simulation stops at its seed node.
    #[serde(default = "default_retries")]
    pub max_retries: usize,
}

fn default_retries() -> usize {
    1000
}

pub const PRESET_NAMES: [&str; 2] = ["chain-deterministic", "desk-default"];

impl SynthConfig {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "chain-deterministic" => Ok(SynthConfig {
                node_count: 50,
                graph_model: GraphModel::Chain,
                edge_param: EdgeParam::None,
                activation: ActivationProb::Fixed(1.0),
                cascade_count: 300,
                max_cascade_length: 50,
                seed: 7,
                max_retries: default_retries(),
            }),
            "desk-default" => Ok(SynthConfig {
                node_count: 200,
                graph_model: GraphModel::UniformRandomEdges,
                edge_param: EdgeParam::EdgeCount(1200),
                activation: ActivationProb::Uniform { lo: 0.2, hi: 0.8 },
                cascade_count: 500,
                max_cascade_length: 200,
                seed: 11,
                max_retries: default_retries(),
            }),
            other => Err(Error::arg(format!(
                "unknown preset `{other}` (available: {})",
                PRESET_NAMES.join(", ")
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.node_count;
        if n == 0 {
            return Err(Error::arg("node_count must be positive"));
        }
        if self.max_cascade_length == 0 {
            return Err(Error::arg("max_cascade_length must be positive"));
        }
        match self.activation {
            ActivationProb::Fixed(p) if !(0.0..=1.0).contains(&p) => {
                return Err(Error::arg(format!(
                    "activation probability {p} outside [0, 1]"
                )))
            }
            ActivationProb::Uniform { lo, hi }
                if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi =>
            {
                return Err(Error::arg(format!("bad activation range [{lo}, {hi}]")))
            }
            _ => {}
        }
        let possible = n * (n - 1);
        match (self.graph_model, self.edge_param) {
            (GraphModel::UniformRandomEdges, EdgeParam::Density(d))
                if !(0.0..=1.0).contains(&d) =>
            {
                Err(Error::arg(format!("density {d} outside [0, 1]")))
            }
            (GraphModel::UniformRandomEdges, EdgeParam::EdgeCount(e)) if e > possible => {
                Err(Error::arg(format!(
                    "{e} edges exceed the {possible} possible on {n} nodes"
                )))
            }
            (GraphModel::UniformRandomEdges, EdgeParam::Density(_) | EdgeParam::EdgeCount(_)) => {
                Ok(())
            }
            (GraphModel::PreferentialAttachment, EdgeParam::Attachment(a)) if a == 0 || a >= n => {
                Err(Error::arg(format!(
                    "attachment count {a} must lie in 1..{n}"
                )))
            }
            (GraphModel::PreferentialAttachment, EdgeParam::Attachment(_)) => Ok(()),
            (GraphModel::Chain | GraphModel::Grid, EdgeParam::None) => Ok(()),
            (model, param) => Err(Error::arg(format!(
                "edge parameter {param:?} does not apply to {model:?}"
            ))),
        }
    }
}

/// Generates the configured graph family from `rng`.
pub fn generate_graph(config: &SynthConfig, rng: &mut impl Rng) -> Result<DataGraph> {
    config.validate()?;
    let n = config.node_count;
    let id = NodeId::from_index;
    let mut edges = Vec::new();
    match config.graph_model {
        GraphModel::Chain => {
            edges.extend((1..n).map(|i| (id(i - 1), id(i))));
        }
        GraphModel::Grid => {
            let width = (n as f64).sqrt().ceil() as usize;
            for i in 0..n {
                let mut link = |j: usize| {
                    edges.push((id(i), id(j)));
                    edges.push((id(j), id(i)));
                };
                if (i + 1) % width != 0 && i + 1 < n {
                    link(i + 1);
                }
                if i + width < n {
                    link(i + width);
                }
            }
        }
        GraphModel::UniformRandomEdges => {
            let possible = n * (n - 1);
            let count = match config.edge_param {
                EdgeParam::EdgeCount(e) => e,
                EdgeParam::Density(d) => (d * possible as f64).round() as usize,
                _ => unreachable!("validated"),
            };
            if count > 0 {
                for k in index::sample(rng, possible, count).into_vec() {
                    let u = k / (n - 1);
                    let j = k % (n - 1);
                    let v = if j < u { j } else { j + 1 };
                    edges.push((id(u), id(v)));
                }
            }
        }
        GraphModel::PreferentialAttachment => {
            let EdgeParam::Attachment(a) = config.edge_param else {
                unreachable!("validated")
            };
            // endpoint multiset: each node appears once per incident edge
            let mut endpoints = Vec::new();
            for u in 0..=a {
                for v in 0..u {
                    edges.push((id(u), id(v)));
                    edges.push((id(v), id(u)));
                    endpoints.extend([u, v]);
                }
            }
            for u in (a + 1)..n {
                let mut chosen: Vec<usize> = Vec::with_capacity(a);
                while chosen.len() < a {
                    let v = endpoints[rng.gen_range(0..endpoints.len())];
                    if !chosen.contains(&v) {
                        chosen.push(v);
                    }
                }
                chosen.sort_unstable();
                for v in chosen {
                    edges.push((id(u), id(v)));
                    edges.push((id(v), id(u)));
                    endpoints.extend([u, v]);
                }
            }
        }
    }
    DataGraph::from_edges(n, &edges)
}

/// Draws one probability per edge, in (source, target) order.
pub fn assign_probabilities(
    graph: &DataGraph,
    activation: ActivationProb,
    rng: &mut impl Rng,
) -> Result<EdgeProbabilities> {
    let mut probs = EdgeProbabilities::new(graph.node_count());
    for (u, v) in graph.edges() {
        let p = match activation {
            ActivationProb::Fixed(p) => p,
            ActivationProb::Uniform { lo, hi } if lo == hi => lo,
            ActivationProb::Uniform { lo, hi } => rng.gen_range(lo..=hi),
        };
        probs.set(u, v, p)?;
    }
    Ok(probs)
}

/// Breadth-order independent-cascade run from `seed`. Every node activated
/// in a round gets one Bernoulli attempt per still-inactive out-neighbour;
/// nodes activated in the same round are recorded in ascending id order.
/// The result is truncated to `max_len` nodes.
pub fn simulate_ic_cascade(
    graph: &DataGraph,
    probs: &EdgeProbabilities,
    seed: NodeId,
    max_len: usize,
    rng: &mut impl Rng,
) -> Result<Cascade> {
    if !graph.contains(seed) {
        return Err(Error::arg(format!("seed node {seed} is not in the graph")));
    }
    let mut active = vec![false; graph.node_count()];
    active[seed.index()] = true;
    let mut order = vec![seed];
    let mut frontier = vec![seed];
    while !frontier.is_empty() && order.len() < max_len {
        let mut fresh = Vec::new();
        for &u in &frontier {
            for &v in graph.successors(u) {
                if !active[v.index()] && rng.gen::<f64>() < probs.get(u, v) {
                    active[v.index()] = true;
                    fresh.push(v);
                }
            }
        }
        fresh.sort_unstable();
        let room = max_len - order.len();
        order.extend(fresh.iter().take(room).copied());
        frontier = fresh;
    }
    order.truncate(max_len.max(1));
    Cascade::new(order)
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: SynthConfig,
    pub graph: DataGraph,
    pub cascades: Vec<Cascade>,
    pub probabilities: EdgeProbabilities,
    /// Simulations discarded for stopping at their seed node.
    pub resampled: usize,
}

/// Graph, ground-truth probabilities, then cascades from uniformly drawn
/// seed nodes; all randomness comes from `config.seed`.
pub fn generate_dataset(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let graph = generate_graph(config, &mut rng)?;
    let probabilities = assign_probabilities(&graph, config.activation, &mut rng)?;
    let n = config.node_count;
    let mut cascades = Vec::with_capacity(config.cascade_count);
    let mut resampled = 0;
    let want_pairs = config.max_cascade_length >= 2;
    for k in 0..config.cascade_count {
        let mut attempts = 0;
        loop {
            let seed = NodeId::from_index(rng.gen_range(0..n));
            let c = simulate_ic_cascade(
                &graph,
                &probabilities,
                seed,
                config.max_cascade_length,
                &mut rng,
            )?;
            if c.len() >= 2 || !want_pairs {
                cascades.push(c);
                break;
            }
            resampled += 1;
            attempts += 1;
            if attempts > config.max_retries {
                return Err(Error::arg(format!(
                    "cascade {k} stayed at its seed node after {} retries; \
                     raise the activation probability or graph density",
                    config.max_retries
                )));
            }
        }
    }
    Ok(Dataset {
        config: config.clone(),
        graph,
        cascades,
        probabilities,
        resampled,
    })
}

pub const GRAPH_FILE: &str = "graph.txt";
pub const CASCADES_FILE: &str = "cascades.txt";
pub const PROBABILITIES_FILE: &str = "edge_probs.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

impl Dataset {
    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "tool": "topolstm",
            "tool_version": crate::VERSION,
            "config": self.config,
            "node_count": self.graph.node_count(),
            "edge_count": self.graph.edge_count(),
            "cascade_count": self.cascades.len(),
            "resampled": self.resampled,
            "files": {
                "graph": GRAPH_FILE,
                "cascades": CASCADES_FILE,
                "edge_probabilities": PROBABILITIES_FILE,
            },
        })
    }

    /// Writes the graph, cascades, probabilities and manifest into `dir`,
    /// labelling nodes by their ids.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let labels = NodeLabels::identity(self.graph.node_count());
        fs::write(dir.join(GRAPH_FILE), self.graph.to_edge_list(&labels))?;
        fs::write(
            dir.join(CASCADES_FILE),
            format_cascades(&self.cascades, &labels),
        )?;
        fs::write(
            dir.join(PROBABILITIES_FILE),
            self.probabilities.to_text(&labels),
        )?;
        let mut manifest = serde_json::to_string_pretty(&self.manifest())?;
        manifest.push('\n');
        fs::write(dir.join(MANIFEST_FILE), manifest)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(model: GraphModel, param: EdgeParam, n: usize) -> SynthConfig {
        SynthConfig {
            node_count: n,
            graph_model: model,
            edge_param: param,
            activation: ActivationProb::Fixed(1.0),
            cascade_count: 10,
            max_cascade_length: n,
            seed: 3,
            max_retries: 100,
        }
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1)
    }

    #[test]
    fn chain_of_five() {
        let g = generate_graph(&config(GraphModel::Chain, EdgeParam::None, 5), &mut rng()).unwrap();
        let edges: Vec<(u32, u32)> = g.edges().map(|(u, v)| (u.0, v.0)).collect();
        assert_eq!(edges, vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
    }

    #[test]
    fn zero_density_is_empty() {
        let c = config(GraphModel::UniformRandomEdges, EdgeParam::Density(0.0), 20);
        assert_eq!(generate_graph(&c, &mut rng()).unwrap().edge_count(), 0);
    }

    #[test]
    fn edge_count_is_exact_and_seeded() {
        let c = config(
            GraphModel::UniformRandomEdges,
            EdgeParam::EdgeCount(300),
            40,
        );
        let a = generate_graph(&c, &mut rng()).unwrap();
        let b = generate_graph(&c, &mut rng()).unwrap();
        assert_eq!(a.edge_count(), 300);
        assert_eq!(a, b);
        assert!(a.edges().all(|(u, v)| u != v));
    }

    #[test]
    fn impossible_parameters_rejected() {
        let c = config(GraphModel::UniformRandomEdges, EdgeParam::EdgeCount(21), 5);
        assert!(generate_graph(&c, &mut rng()).is_err());
        let c = config(GraphModel::UniformRandomEdges, EdgeParam::Density(1.5), 5);
        assert!(c.validate().is_err());
        let c = config(GraphModel::Chain, EdgeParam::Density(0.1), 5);
        assert!(c.validate().is_err());
        let c = config(
            GraphModel::PreferentialAttachment,
            EdgeParam::Attachment(5),
            5,
        );
        assert!(c.validate().is_err());
    }

    #[test]
    fn grid_and_attachment_are_symmetric() {
        for c in [
            config(GraphModel::Grid, EdgeParam::None, 10),
            config(
                GraphModel::PreferentialAttachment,
                EdgeParam::Attachment(2),
                30,
            ),
        ] {
            let g = generate_graph(&c, &mut rng()).unwrap();
            assert!(g.edge_count() > 0);
            assert!(g.edges().all(|(u, v)| g.has_edge(v, u)));
        }
        let g = generate_graph(&config(GraphModel::Grid, EdgeParam::None, 9), &mut rng()).unwrap();
        assert_eq!(g.edge_count(), 24);
    }

    #[test]
    fn certain_chain_spread_and_no_spread() {
        let c = config(GraphModel::Chain, EdgeParam::None, 6);
        let g = generate_graph(&c, &mut rng()).unwrap();
        let ones = assign_probabilities(&g, ActivationProb::Fixed(1.0), &mut rng()).unwrap();
        let full = simulate_ic_cascade(&g, &ones, NodeId(0), 10, &mut rng()).unwrap();
        assert_eq!(full.nodes(), &(0..6).map(NodeId).collect::<Vec<_>>()[..]);
        let cut = simulate_ic_cascade(&g, &ones, NodeId(2), 2, &mut rng()).unwrap();
        assert_eq!(cut.nodes(), &[NodeId(2), NodeId(3)]);
        let zeros = assign_probabilities(&g, ActivationProb::Fixed(0.0), &mut rng()).unwrap();
        let lone = simulate_ic_cascade(&g, &zeros, NodeId(0), 10, &mut rng()).unwrap();
        assert_eq!(lone.len(), 1);
    }

    #[test]
    fn round_members_ordered_by_id() {
        let g = DataGraph::from_edges(
            4,
            &[
                (NodeId(0), NodeId(3)),
                (NodeId(0), NodeId(1)),
                (NodeId(3), NodeId(2)),
            ],
        )
        .unwrap();
        let p = assign_probabilities(&g, ActivationProb::Fixed(1.0), &mut rng()).unwrap();
        let c = simulate_ic_cascade(&g, &p, NodeId(0), 10, &mut rng()).unwrap();
        assert_eq!(c.nodes(), &[NodeId(0), NodeId(1), NodeId(3), NodeId(2)]);
    }

    #[test]
    fn empty_dataset_is_valid() {
        let mut c = SynthConfig::preset("chain-deterministic").unwrap();
        c.cascade_count = 0;
        let d = generate_dataset(&c).unwrap();
        assert!(d.cascades.is_empty());
        assert_eq!(d.manifest()["cascade_count"], 0);
    }

    #[test]
    fn stuck_simulation_hits_retry_cap() {
        let mut c = config(GraphModel::Chain, EdgeParam::None, 5);
        c.activation = ActivationProb::Fixed(0.0);
        c.max_retries = 3;
        assert!(generate_dataset(&c).is_err());
    }

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            SynthConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(SynthConfig::preset("nope").is_err());
    }
}
