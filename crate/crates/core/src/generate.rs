//! Seeded synthetic graphs for tests, benchmarks and experiments.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Partition, WebGraph};

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Directed Erdős–Rényi graph without self-loops, each ordered pair linked
/// with probability `mean_out_degree / (n - 1)`, dangling pages patched.
pub fn random_graph(n: usize, mean_out_degree: f64, seed: u64) -> WebGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = (mean_out_degree / (n - 1) as f64).min(1.0);
    let mut edges = Vec::new();
    for s in 0..n {
        for d in 0..n {
            if s != d && unit(&mut rng) < p {
                edges.push((s, d));
            }
        }
    }
    WebGraph::from_edges(n, edges)
        .expect("n >= 2")
        .patch_dangling()
        .0
}

/// `communities` blocks of `size` pages; pairs inside a block link with
/// probability `p_in`, pairs across blocks with `p_out`. Dangling pages are
/// patched. Returns the graph with its block partition.
pub fn community_graph(
    communities: usize,
    size: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> (WebGraph, Partition) {
    let n = communities * size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for s in 0..n {
        for d in 0..n {
            if s == d {
                continue;
            }
            let p = if s / size == d / size { p_in } else { p_out };
            if unit(&mut rng) < p {
                edges.push((s, d));
            }
        }
    }
    let graph = WebGraph::from_edges(n, edges)
        .expect("n >= 2")
        .patch_dangling()
        .0;
    let labels: Vec<usize> = (0..n).map(|i| i / size).collect();
    (graph, Partition::from_labels(&labels).expect("nonempty"))
}

/// Random assignment of `n` pages to `groups` nonempty groups.
pub fn random_partition(n: usize, groups: usize, seed: u64) -> Partition {
    assert!(groups >= 1 && groups <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // the first `groups` pages of a shuffled order seed one group each
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    let mut labels = vec![0; n];
    for (rank, &page) in order.iter().enumerate() {
        labels[page] = if rank < groups {
            rank
        } else {
            (rng.next_u64() % groups as u64) as usize
        };
    }
    Partition::from_labels(&labels).expect("nonempty")
}
