//! Edge-flipping baseline: randomized response on every adjacency bit,
//! followed by exact diffusion on the released graph.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{indicator, run_exact_diffusion, DiffusionSchedule};
use crate::error::{invalid, Error, Result};
use crate::graph::SparseGraph;
use crate::noise::RngStream;

pub const DEFAULT_NODE_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipConfig {
    /// Probability that a bit is redrawn uniformly from {0, 1}.
    pub p: f64,
    /// Pairs touching this node are released unchanged.
    pub personalized_seed: Option<usize>,
    pub node_limit: usize,
}

impl FlipConfig {
    pub fn new(p: f64) -> Self {
        Self { p, personalized_seed: None, node_limit: DEFAULT_NODE_LIMIT }
    }

    pub fn with_seed(mut self, seed: usize) -> Self {
        self.personalized_seed = Some(seed);
        self
    }

    fn check(&self, n: usize) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(invalid(format!("flip probability must lie in (0, 1], got {}", self.p)));
        }
        if n > self.node_limit {
            return Err(Error::SizeLimit { n, limit: self.node_limit });
        }
        if let Some(s) = self.personalized_seed {
            if s >= n {
                return Err(invalid(format!("seed node {s} out of range for {n} nodes")));
            }
        }
        Ok(())
    }
}

/// The released graph. Nodes may be isolated, so it is kept as upper
/// adjacency rows rather than a [`SparseGraph`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlippedGraph {
    /// `upper[i]` lists the neighbours `j > i` of `i`, ascending.
    upper: Vec<Vec<u32>>,
}

/// Connected part of a flipped graph that diffusion runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipComponent {
    pub graph: SparseGraph,
    /// Component id -> id in the flipped graph.
    pub node_ids: Vec<usize>,
    /// Nodes of the flipped graph outside the component.
    pub dropped_nodes: usize,
}

/// Flips every pair of `g`.
pub fn edge_flipping(g: &SparseGraph, cfg: &FlipConfig, rng: &RngStream) -> Result<FlippedGraph> {
    let n = g.node_count();
    cfg.check(n)?;
    Ok(flip_rows(n, cfg, rng, |i| {
        let row = g.neighbors(i);
        &row[row.partition_point(|&j| j as usize <= i)..]
    }))
}

/// Flips every pair of the graph on `n` nodes with the given edges. Unlike
/// [`edge_flipping`] the input may have isolated nodes or no edges at all.
pub fn edge_flipping_from_edges(
    n: usize,
    edges: &[(usize, usize)],
    cfg: &FlipConfig,
    rng: &RngStream,
) -> Result<FlippedGraph> {
    cfg.check(n)?;
    let mut upper = vec![Vec::new(); n];
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(invalid(format!("edge ({u}, {v}) out of range for {n} nodes")));
        }
        if u != v {
            upper[u.min(v)].push(u.max(v) as u32);
        }
    }
    for row in &mut upper {
        row.sort_unstable();
        row.dedup();
    }
    Ok(flip_rows(n, cfg, rng, |i| &upper[i]))
}

/// Row `i` draws from `rng.derive(i)`, so the result does not depend on
/// how rows are scheduled across threads.
fn flip_rows<'a>(n: usize, cfg: &FlipConfig, rng: &RngStream, upper: impl Fn(usize) -> &'a [u32] + Sync) -> FlippedGraph {
    let p = cfg.p;
    let half = p / 2.0;
    let seed = cfg.personalized_seed;
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let existing = upper(i);
            if seed == Some(i) {
                return existing.to_vec();
            }
            let mut r = rng.derive(i as u64).rng();
            let mut out = Vec::new();
            let mut present_iter = existing.iter().peekable();
            for j in (i + 1)..n {
                let present = if present_iter.peek().is_some_and(|&&e| e as usize == j) {
                    present_iter.next();
                    true
                } else {
                    false
                };
                let keep = if seed == Some(j) {
                    present
                } else {
                    // One uniform decides both whether to redraw and the
                    // redrawn bit.
                    let u: f64 = r.gen();
                    if u < p {
                        u < half
                    } else {
                        present
                    }
                };
                if keep {
                    out.push(j as u32);
                }
            }
            out
        })
        .collect();
    FlippedGraph { upper: rows }
}

impl FlippedGraph {
    pub fn node_count(&self) -> usize {
        self.upper.len()
    }

    pub fn edge_count(&self) -> usize {
        self.upper.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let (a, b) = (u.min(v), u.max(v));
        a != b && b < self.node_count() && self.upper[a].binary_search(&(b as u32)).is_ok()
    }

    /// Edges `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.upper.iter().enumerate().flat_map(|(i, row)| row.iter().map(move |&j| (i, j as usize)))
    }

    /// Full symmetric rows, possibly empty.
    fn symmetric_rows(&self) -> (Vec<usize>, Vec<u32>) {
        let n = self.node_count();
        let mut degree = vec![0usize; n];
        for (i, row) in self.upper.iter().enumerate() {
            degree[i] += row.len();
            for &j in row {
                degree[j as usize] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0u32; offsets[n]];
        // Ascending i fills every row with its lower neighbours (in order)
        // before its upper ones, so rows come out sorted.
        for (i, row) in self.upper.iter().enumerate() {
            for &j in row {
                neighbors[cursor[i]] = j;
                cursor[i] += 1;
                let j = j as usize;
                neighbors[cursor[j]] = i as u32;
                cursor[j] += 1;
            }
        }
        (offsets, neighbors)
    }

    /// The component containing `anchor`, or the largest component (ties
    /// to the one with the smallest node) when `anchor` is `None`.
    pub fn component(&self, anchor: Option<usize>) -> Result<FlipComponent> {
        let n = self.node_count();
        let (offsets, neighbors) = self.symmetric_rows();
        let mut label = vec![usize::MAX; n];
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let c = sizes.len();
            label[start] = c;
            stack.push(start);
            let mut size = 0;
            while let Some(i) = stack.pop() {
                size += 1;
                for &j in &neighbors[offsets[i]..offsets[i + 1]] {
                    let j = j as usize;
                    if label[j] == usize::MAX {
                        label[j] = c;
                        stack.push(j);
                    }
                }
            }
            sizes.push(size);
        }
        let chosen = match anchor {
            Some(a) if a >= n => return Err(invalid(format!("node {a} out of range for {n} nodes"))),
            Some(a) => label[a],
            // max_by_key keeps the last maximum; reverse so the first wins.
            None => (0..sizes.len()).rev().max_by_key(|&c| sizes[c]).ok_or(Error::EmptyGraph)?,
        };
        let keep: Vec<usize> = (0..n).filter(|&i| label[i] == chosen).collect();
        if keep.len() < 2 {
            return Err(Error::IsolatedNode { node: keep[0] });
        }
        let mut new_id = vec![u32::MAX; n];
        for (k, &i) in keep.iter().enumerate() {
            new_id[i] = k as u32;
        }
        let mut sub_offsets = Vec::with_capacity(keep.len() + 1);
        sub_offsets.push(0);
        let mut sub_neighbors = Vec::new();
        for &i in &keep {
            sub_neighbors.extend(neighbors[offsets[i]..offsets[i + 1]].iter().map(|&j| new_id[j as usize]));
            sub_offsets.push(sub_neighbors.len());
        }
        let graph = SparseGraph::from_sorted_rows(sub_offsets, sub_neighbors)?;
        Ok(FlipComponent { dropped_nodes: n - keep.len(), graph, node_ids: keep })
    }
}

/// Diffusion from `seed` on the component of the flipped graph that
/// contains it. Scores are indexed by original node id; nodes outside the
/// component score 0.
pub fn diffusion_on_flipped(
    flipped: &FlippedGraph,
    schedule: &DiffusionSchedule,
    seed: usize,
    steps: usize,
) -> Result<(Vec<f64>, FlipComponent)> {
    let comp = flipped.component(Some(seed))?;
    let local_seed = comp.node_ids.binary_search(&seed).expect("seed lies in its own component");
    let s = indicator(comp.graph.node_count(), local_seed)?;
    let local = run_exact_diffusion(&comp.graph, schedule, &s, steps)?;
    let mut scores = vec![0.0; flipped.node_count()];
    for (k, &i) in comp.node_ids.iter().enumerate() {
        scores[i] = local[k];
    }
    Ok((scores, comp))
}
