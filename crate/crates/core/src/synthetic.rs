//! Seeded random graph generators for examples, tests and oracle runs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::graph::SparseGraph;
use crate::noise::RngStream;

/// Preferential attachment: a clique on `m + 1` nodes, then each new node
/// links to `m` distinct earlier nodes chosen with probability
/// proportional to degree. Yields a connected power-law graph with about
/// `n m` edges.
pub fn barabasi_albert(n: usize, m: usize, rng: &RngStream) -> Result<SparseGraph> {
    if m == 0 || n <= m + 1 {
        return Err(invalid(format!("need m >= 1 and n > m + 1, got n = {n}, m = {m}")));
    }
    let mut r = rng.rng();
    let mut edges = Vec::with_capacity(n * m);
    // Every edge endpoint once; sampling from it is degree-proportional.
    let mut endpoints: Vec<u32> = Vec::with_capacity(2 * n * m);
    for u in 0..=m {
        for v in (u + 1)..=m {
            edges.push((u, v));
            endpoints.push(u as u32);
            endpoints.push(v as u32);
        }
    }
    let mut targets = Vec::with_capacity(m);
    for v in (m + 1)..n {
        targets.clear();
        while targets.len() < m {
            let t = endpoints[r.gen_range(0..endpoints.len())] as usize;
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, v));
            endpoints.push(t as u32);
            endpoints.push(v as u32);
        }
    }
    SparseGraph::from_edges(n, edges)
}

/// A uniformly random recursive tree on `n` nodes plus `extra` random
/// edges (duplicates and self-loops are dropped, so the final count can be
/// lower). Always connected.
pub fn random_connected(n: usize, extra: usize, rng: &RngStream) -> Result<SparseGraph> {
    if n < 2 {
        return Err(invalid(format!("need at least 2 nodes, got {n}")));
    }
    let mut r = rng.rng();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let mut edges = Vec::with_capacity(n + extra);
    for i in 1..n {
        edges.push((order[i], order[r.gen_range(0..i)]));
    }
    for _ in 0..extra {
        edges.push((r.gen_range(0..n), r.gen_range(0..n)));
    }
    SparseGraph::from_edges(n, edges)
}

/// Two hubs `0` and `1` joined by an edge, each with `hub_degree - 1`
/// private leaves.
pub fn double_star(hub_degree: usize) -> Result<SparseGraph> {
    if hub_degree < 2 {
        return Err(invalid(format!("hub degree must be at least 2, got {hub_degree}")));
    }
    let leaves = hub_degree - 1;
    let n = 2 + 2 * leaves;
    let mut edges = vec![(0, 1)];
    for l in 0..leaves {
        edges.push((0, 2 + l));
        edges.push((1, 2 + leaves + l));
    }
    SparseGraph::from_edges(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barabasi_albert_shape() {
        let g = barabasi_albert(2000, 5, &RngStream::new(1, 0)).unwrap();
        assert_eq!(g.node_count(), 2000);
        assert_eq!(g.edge_count(), 15 + 5 * (2000 - 6));
        assert!(g.is_connected());
        let max_deg = (0..2000).map(|i| g.degree(i)).max().unwrap();
        assert!(max_deg > 50, "heavy tail expected, max degree {max_deg}");
        assert_eq!(g, barabasi_albert(2000, 5, &RngStream::new(1, 0)).unwrap());
    }

    #[test]
    fn random_connected_is_connected() {
        for s in 0..20 {
            let g = random_connected(50, 30, &RngStream::new(s, 0)).unwrap();
            assert!(g.is_connected());
            assert!(g.edge_count() >= 49);
        }
    }

    #[test]
    fn double_star_degrees() {
        let g = double_star(100).unwrap();
        assert_eq!(g.degree(0), 100);
        assert_eq!(g.degree(1), 100);
        assert_eq!(g.node_count(), 200);
        assert!(g.has_edge(0, 1));
    }
}
