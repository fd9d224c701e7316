//! Synthetic graph tasks for exercising the trainer.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GnnDims, GraphInput, TrainSample, GEOMETRIC_DIM};
use crate::assemble::Adjacency;
use crate::linalg::Matrix;

/// Semantic width of the toy features: a two-way class code plus two
/// distractor channels.
pub const TOY_SEMANTIC_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    pub graphs: usize,
    /// Each graph is a perfect matching on `2 * pairs` vertices.
    pub pairs: usize,
    /// Half-width of the uniform noise added to every feature.
    pub noise: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self { graphs: 16, pairs: 8, noise: 0.1 }
    }
}

pub fn toy_dims(layers: usize) -> GnnDims {
    GnnDims { semantic_dim: TOY_SEMANTIC_DIM, d: 16, head_hidden: 16, layers }
}

fn graph(cfg: &ToyConfig, rng: &mut ChaCha8Rng, label: impl Fn(usize, &[usize], &Adjacency) -> f64) -> TrainSample<f64> {
    let v = 2 * cfg.pairs;
    let mut order: Vec<usize> = (0..v).collect();
    order.shuffle(rng);
    let edges: Vec<[usize; 2]> = order.chunks(2).map(|p| [p[0], p[1]]).collect();
    let adj = Adjacency::from_edges(v, &edges).expect("matching edges are valid");
    let class: Vec<usize> = (0..v).map(|_| rng.random_range(0..2)).collect();
    let noise = |rng: &mut ChaCha8Rng| rng.random_range(-cfg.noise..=cfg.noise);
    let semantic = Matrix::from_fn(v, TOY_SEMANTIC_DIM, |r, c| {
        let base = match c {
            0 => (class[r] == 1) as u8 as f64,
            1 => (class[r] == 0) as u8 as f64,
            _ => 0.0,
        };
        base + noise(rng)
    });
    let geometric = Matrix::from_fn(v, GEOMETRIC_DIM, |_, _| noise(rng));
    let labels = (0..v).map(|i| label(i, &class, &adj)).collect();
    let input = GraphInput::from_parts(semantic, geometric, &adj).expect("toy shapes agree");
    TrainSample { input, labels }
}

/// Label is the parity of the number of class-1 neighbours. Each vertex's own
/// features carry no information about it.
pub fn neighbor_parity(cfg: &ToyConfig, seed: u64) -> Vec<TrainSample<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cfg.graphs)
        .map(|_| {
            graph(cfg, &mut rng, |i, class, adj| {
                (adj.neighbors(i).iter().filter(|&&j| class[j] == 1).count() % 2) as f64
            })
        })
        .collect()
}

/// Label is the vertex's own class.
pub fn separable(cfg: &ToyConfig, seed: u64) -> Vec<TrainSample<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cfg.graphs).map(|_| graph(cfg, &mut rng, |i, class, _| class[i] as f64)).collect()
}

/// A random graph on `vertices` vertices (edge probability 0.4) with
/// features in `[-1, 1]` and random binary labels, for gradient checks.
pub fn random_sample(rng: &mut impl Rng, vertices: usize, semantic_dim: usize) -> TrainSample<f64> {
    let mut edges = Vec::new();
    for i in 0..vertices {
        for j in i + 1..vertices {
            if rng.random_bool(0.4) {
                edges.push([i, j]);
            }
        }
    }
    let adj = Adjacency::from_edges(vertices, &edges).expect("i < j edges are valid");
    let semantic = Matrix::from_fn(vertices, semantic_dim, |_, _| rng.random_range(-1.0..=1.0));
    let geometric = Matrix::from_fn(vertices, GEOMETRIC_DIM, |_, _| rng.random_range(-1.0..=1.0));
    let labels = (0..vertices).map(|_| rng.random_range(0..2) as f64).collect();
    TrainSample { input: GraphInput::from_parts(semantic, geometric, &adj).expect("shapes agree"), labels }
}

/// A model with every parameter uniform in `[-scale, scale]`.
pub fn random_model(rng: &mut impl Rng, dims: GnnDims, scale: f64) -> super::GnnModel<f64> {
    let mut m = super::GnnModel::zeros(dims);
    for (_, t) in m.tensors_mut() {
        t.as_mut_slice().iter_mut().for_each(|v| *v = rng.random_range(-scale..=scale));
    }
    m
}
