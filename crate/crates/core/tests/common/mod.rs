#![allow(dead_code)]

use matcons::graph::{self, MatrixWeightedGraph};
use matcons::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected graph with `n ≤ max_n`, `k ≤ max_k`, scales in `[0.1, 10]`.
pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_k: usize) -> MatrixWeightedGraph {
    let n = rng.random_range(2..=max_n);
    let k = rng.random_range(1..=max_k);
    let p = rng.random_range(0.0..0.6);
    graph::random_graph(n, k, p, rng.random_range(0.2..2.0), (0.1, 10.0), rng).unwrap()
}

pub fn random_tree(rng: &mut ChaCha8Rng, max_n: usize, max_k: usize) -> MatrixWeightedGraph {
    let n = rng.random_range(2..=max_n);
    let k = rng.random_range(1..=max_k);
    graph::random_graph(n, k, 0.0, rng.random_range(0.2..2.0), (0.1, 10.0), rng).unwrap()
}

pub fn random_spd(m: usize, rng: &mut ChaCha8Rng) -> Mat {
    let g = Mat::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&g * g.transpose()) / m as f64 + Mat::identity(m, m) * 0.1
}

pub fn random_symmetric(m: usize, rng: &mut ChaCha8Rng) -> Mat {
    let g = Mat::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&g + g.transpose()) * 0.5
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
