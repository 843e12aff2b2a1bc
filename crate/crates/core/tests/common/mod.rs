#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use setree::Graph;

/// Random connected graph: a random spanning tree plus each remaining pair with
/// probability `p`.
pub fn random_connected(n: usize, p: f64, seed: u64) -> Graph<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.gen_range(0..v), v));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::unweighted(n, &edges).unwrap()
}

/// Random graph that may be disconnected or have isolated vertices (at least
/// one edge).
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = vec![(0, 1)];
    for u in 0..n {
        for v in u + 1..n {
            if (u, v) != (0, 1) && rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::unweighted(n, &edges).unwrap()
}

/// Random connected graph with weights in `[0.5, 3)`.
pub fn random_weighted(n: usize, p: f64, seed: u64) -> Graph<f64> {
    let base = random_connected(n, p, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let edges: Vec<(usize, usize, f64)> = base
        .edges()
        .iter()
        .map(|e| (e.u, e.v, rng.gen_range(0.5..3.0)))
        .collect();
    Graph::from_edges(n, edges, None, 0).unwrap()
}

/// `graph` with vertex `v` renamed to `perm[v]`.
pub fn permuted(graph: &Graph<f64>, perm: &[usize]) -> Graph<f64> {
    let edges: Vec<(usize, usize, f64)> = graph
        .edges()
        .iter()
        .map(|e| (perm[e.u], perm[e.v], e.weight))
        .collect();
    Graph::from_edges(graph.vertex_count(), edges, None, graph.class()).unwrap()
}

pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng);
    p
}
