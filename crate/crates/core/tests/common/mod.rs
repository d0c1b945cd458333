#![allow(dead_code)]

pub mod oracles;

use rand::seq::SliceRandom;
use rand::Rng;

use topolstm::graph::{load_graph, Directedness, LoadedGraph};
use topolstm::{Cascade, DataGraph, Model, ModelConfig, NodeId, ScoreMode};

/// Directed graph on `m` nodes with each ordered pair present with probability `p`.
pub fn random_graph(rng: &mut impl Rng, m: usize, p: f64) -> DataGraph {
    let mut edges = Vec::new();
    for u in 0..m {
        for v in 0..m {
            if u != v && rng.gen::<f64>() < p {
                edges.push((NodeId::from_index(u), NodeId::from_index(v)));
            }
        }
    }
    DataGraph::from_edges(m, &edges).unwrap()
}

/// `len` distinct nodes in random order; not necessarily consistent with any graph.
pub fn random_cascade(rng: &mut impl Rng, m: usize, len: usize) -> Cascade {
    let mut nodes: Vec<NodeId> = (0..m).map(NodeId::from_index).collect();
    nodes.shuffle(rng);
    nodes.truncate(len);
    Cascade::new(nodes).unwrap()
}

/// Model with every parameter drawn from U(-scale, scale).
pub fn random_model(rng: &mut impl Rng, d: usize, m: usize, mode: ScoreMode, scale: f64) -> Model {
    let mut model = Model::zeros(ModelConfig::new(d, m).with_score_mode(mode)).unwrap();
    let params = model.params_mut();
    for i in 0..params.len() {
        for x in params[i].as_mut_slice() {
            *x = rng.gen_range(-scale..scale);
        }
    }
    model
}

/// The seven-node running example: undirected A-B, A-C, A-F, B-C, B-E, C-G, D-E.
pub fn running_example() -> (LoadedGraph, Cascade) {
    let loaded = load_graph(
        "A B\nA C\nA F\nB C\nB E\nC G\nD E\n",
        Directedness::Undirected,
    )
    .unwrap();
    let ids: Vec<NodeId> = ["A", "B", "C", "D"]
        .iter()
        .map(|l| loaded.labels.get(l).unwrap())
        .collect();
    (loaded, Cascade::new(ids).unwrap())
}
