//! Undirected simple graphs in compressed adjacency form.
//!
//! A [`SparseGraph`] is immutable once built. Every node has at least one
//! neighbour, so the random-walk matrix `P = A D^{-1}` is well defined on
//! every column. Neighbour lists are sorted ascending, which makes the
//! representation canonical: two graphs are equal iff their lists are.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Row count above which the matrix-vector products fan out over rayon.
const PARALLEL_ROWS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    inv_degree: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeOp {
    Remove,
    Add,
}

/// A single-edge change producing an edge-adjacent graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgePerturbation {
    pub u: usize,
    pub v: usize,
    pub op: EdgeOp,
}

impl EdgePerturbation {
    pub fn remove(u: usize, v: usize) -> Self {
        Self { u, v, op: EdgeOp::Remove }
    }

    pub fn add(u: usize, v: usize) -> Self {
        Self { u, v, op: EdgeOp::Add }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub one_indexed: bool,
    pub extract_lcc: bool,
}

/// Result of ingesting an edge list.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: SparseGraph,
    /// Internal id -> id as written in the source. `None` when the file
    /// already used dense 0-based ids.
    pub id_map: Option<Vec<u64>>,
    pub duplicate_edges: usize,
    pub self_loops: usize,
    /// Nodes discarded by LCC extraction.
    pub dropped_nodes: usize,
}

impl SparseGraph {
    /// Builds a canonical graph on `n` nodes. Self-loops and duplicate
    /// edges are dropped; isolated nodes are an error.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let (graph, _, _) = build_canonical(n, edges)?;
        Ok(graph)
    }

    /// Assembles a graph from rows that are already sorted, symmetric and
    /// free of self-loops and duplicates.
    pub(crate) fn from_sorted_rows(offsets: Vec<usize>, neighbors: Vec<u32>) -> Result<Self> {
        let n = offsets.len().saturating_sub(1);
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut inv_degree = Vec::with_capacity(n);
        for i in 0..n {
            let d = offsets[i + 1] - offsets[i];
            if d == 0 {
                return Err(Error::IsolatedNode { node: i });
            }
            inv_degree.push(1.0 / d as f64);
        }
        let g = Self { offsets, neighbors, inv_degree };
        debug_assert!(g.is_canonical());
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.inv_degree.len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn degree(&self, i: usize) -> u64 {
        (self.offsets[i + 1] - self.offsets[i]) as u64
    }

    pub fn degrees(&self) -> Vec<u64> {
        (0..self.node_count()).map(|i| self.degree(i)).collect()
    }

    /// Sum of all degrees, i.e. twice the edge count.
    pub fn degree_sum(&self) -> u64 {
        self.neighbors.len() as u64
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count()
            && v < self.node_count()
            && self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// Canonical edges `(u, v)` with `u < v`, sorted lexicographically.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .map(|&v| v as usize)
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// `y = P x` with `y_i = sum_{j in N(i)} x_j / d_j`.
    ///
    /// Each row is accumulated over its neighbours in ascending id order,
    /// so the result is bit-identical whether or not rows run in parallel.
    pub fn random_walk_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.node_count(), x.len())?;
        let mut scaled = vec![0.0; x.len()];
        let mut out = vec![0.0; x.len()];
        self.random_walk_into(x, &mut scaled, &mut out);
        Ok(out)
    }

    /// `y = (x + P x) / 2`, the lazy walk `W = (P + I) / 2`.
    pub fn lazy_walk_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.random_walk_matvec(x)?;
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = 0.5 * (*yi + xi);
        }
        Ok(y)
    }

    /// Unchecked kernel behind [`Self::random_walk_matvec`]. `scaled` is
    /// scratch space of length n.
    pub(crate) fn random_walk_into(&self, x: &[f64], scaled: &mut [f64], out: &mut [f64]) {
        for ((s, xi), inv) in scaled.iter_mut().zip(x).zip(&self.inv_degree) {
            *s = xi * inv;
        }
        let scaled = &*scaled;
        let row = |(i, yi): (usize, &mut f64)| {
            let mut acc = 0.0;
            for &j in self.neighbors(i) {
                acc += scaled[j as usize];
            }
            *yi = acc;
        };
        if self.node_count() >= PARALLEL_ROWS {
            out.par_iter_mut().enumerate().for_each(row);
        } else {
            out.iter_mut().enumerate().for_each(row);
        }
    }

    /// Returns the edge-adjacent graph; `self` is left untouched.
    pub fn perturb_edge(&self, p: EdgePerturbation) -> Result<Self> {
        let n = self.node_count();
        let EdgePerturbation { u, v, op } = p;
        if u == v {
            return Err(Error::InvalidPerturbation(format!("self-loop ({u}, {u})")));
        }
        if u >= n || v >= n {
            return Err(Error::InvalidPerturbation(format!(
                "edge ({u}, {v}) outside a graph of {n} nodes"
            )));
        }
        let present = self.has_edge(u, v);
        match op {
            EdgeOp::Remove if !present => {
                return Err(Error::InvalidPerturbation(format!("edge ({u}, {v}) is absent")))
            }
            EdgeOp::Remove if self.degree(u) == 1 || self.degree(v) == 1 => {
                return Err(Error::InvalidPerturbation(format!(
                    "removing ({u}, {v}) would isolate a node"
                )))
            }
            EdgeOp::Add if present => {
                return Err(Error::InvalidPerturbation(format!("edge ({u}, {v}) is already present")))
            }
            _ => {}
        }

        let delta: isize = if op == EdgeOp::Add { 1 } else { -1 };
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::with_capacity((self.neighbors.len() as isize + 2 * delta) as usize);
        offsets.push(0);
        for i in 0..n {
            let row = self.neighbors(i);
            let other = if i == u {
                Some(v as u32)
            } else if i == v {
                Some(u as u32)
            } else {
                None
            };
            match (other, op) {
                (Some(t), EdgeOp::Add) => {
                    let pos = row.partition_point(|&w| w < t);
                    neighbors.extend_from_slice(&row[..pos]);
                    neighbors.push(t);
                    neighbors.extend_from_slice(&row[pos..]);
                }
                (Some(t), EdgeOp::Remove) => {
                    neighbors.extend(row.iter().copied().filter(|&w| w != t));
                }
                (None, _) => neighbors.extend_from_slice(row),
            }
            offsets.push(neighbors.len());
        }
        Self::from_sorted_rows(offsets, neighbors)
    }

    /// Connected-component label per node, labels numbered by first
    /// appearance in ascending node order.
    pub fn component_labels(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for &j in self.neighbors(i) {
                    let j = j as usize;
                    if label[j] == usize::MAX {
                        label[j] = next;
                        stack.push(j);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.component_labels().iter().all(|&c| c == 0)
    }

    /// Subgraph induced by `keep` (sorted ascending, no duplicates); nodes
    /// are relabelled by their position in `keep`.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Result<Self> {
        let mut new_id = vec![u32::MAX; self.node_count()];
        for (k, &i) in keep.iter().enumerate() {
            new_id[i] = k as u32;
        }
        let mut offsets = Vec::with_capacity(keep.len() + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for &i in keep {
            neighbors.extend(
                self.neighbors(i)
                    .iter()
                    .map(|&j| new_id[j as usize])
                    .filter(|&j| j != u32::MAX),
            );
            offsets.push(neighbors.len());
        }
        Self::from_sorted_rows(offsets, neighbors)
    }

    /// Writes the canonical edge list: one `u v` line per edge, `u < v`,
    /// sorted.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        for (u, v) in self.edges() {
            writeln!(w, "{u} {v}")?;
        }
        w.flush()?;
        Ok(())
    }

    fn is_canonical(&self) -> bool {
        (0..self.node_count()).all(|i| {
            let row = self.neighbors(i);
            row.windows(2).all(|w| w[0] < w[1])
                && row.iter().all(|&j| j as usize != i && self.has_edge(j as usize, i))
        })
    }
}

/// Canonicalizes an undirected edge multiset. Returns the graph plus the
/// number of duplicate edges and self-loops removed.
fn build_canonical<I>(n: usize, edges: I) -> Result<(SparseGraph, usize, usize)>
where
    I: IntoIterator<Item = (usize, usize)>,
{
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if n > u32::MAX as usize {
        return Err(Error::SizeLimit { n, limit: u32::MAX as usize });
    }
    let mut pairs = Vec::new();
    let mut self_loops = 0;
    for (u, v) in edges {
        if u >= n || v >= n {
            return Err(Error::InvalidParameter(format!(
                "edge ({u}, {v}) outside a graph of {n} nodes"
            )));
        }
        if u == v {
            self_loops += 1;
            continue;
        }
        pairs.push((u.min(v) as u32, u.max(v) as u32));
    }
    let raw = pairs.len();
    pairs.sort_unstable();
    pairs.dedup();
    let duplicates = raw - pairs.len();

    let mut counts = vec![0usize; n + 1];
    for &(u, v) in &pairs {
        counts[u as usize + 1] += 1;
        counts[v as usize + 1] += 1;
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let offsets = counts;
    let mut fill = offsets.clone();
    let mut neighbors = vec![0u32; 2 * pairs.len()];
    // Pairs are sorted by (u, v) with u < v, so each row receives its
    // smaller neighbours (as the `v` side) before its larger ones.
    for &(u, v) in &pairs {
        neighbors[fill[v as usize]] = u;
        fill[v as usize] += 1;
    }
    for &(u, v) in &pairs {
        neighbors[fill[u as usize]] = v;
        fill[u as usize] += 1;
    }
    let graph = SparseGraph::from_sorted_rows(offsets, neighbors)?;
    Ok((graph, duplicates, self_loops))
}

fn parse_line(line: &str, lineno: usize) -> Result<Option<(u64, u64)>> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let mut tokens = trimmed
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty());
    let mut next = |what: &str| -> Result<u64> {
        let tok = tokens.next().ok_or_else(|| Error::Parse {
            line: lineno,
            message: format!("missing {what} node id"),
        })?;
        tok.parse::<u64>().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("invalid node id {tok:?}"),
        })
    };
    let u = next("first")?;
    let v = next("second")?;
    if let Some(extra) = tokens.next() {
        return Err(Error::Parse {
            line: lineno,
            message: format!("unexpected trailing token {extra:?}"),
        });
    }
    Ok(Some((u, v)))
}

/// Reads a whitespace- (or comma-) separated edge list.
pub fn load_edge_list<R: BufRead>(source: R, options: LoadOptions) -> Result<LoadedGraph> {
    let mut raw = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if let Some((mut u, mut v)) = parse_line(&line, lineno)? {
            if options.one_indexed {
                if u == 0 || v == 0 {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "node id 0 in a one-indexed file".into(),
                    });
                }
                u -= 1;
                v -= 1;
            }
            if u >= u32::MAX as u64 || v >= u32::MAX as u64 {
                return Err(Error::Parse { line: lineno, message: "node id too large".into() });
            }
            raw.push((u as usize, v as usize));
        }
    }
    if raw.iter().all(|&(u, v)| u == v) {
        return Err(Error::EmptyGraph);
    }
    let shift = u64::from(options.one_indexed);

    if !options.extract_lcc {
        let n = raw.iter().map(|&(u, v)| u.max(v)).max().unwrap_or(0) + 1;
        let (graph, duplicate_edges, self_loops) = build_canonical(n, raw)?;
        let id_map = options
            .one_indexed
            .then(|| (0..n as u64).map(|i| i + shift).collect());
        return Ok(LoadedGraph { graph, id_map, duplicate_edges, self_loops, dropped_nodes: 0 });
    }

    // Compact ids first so that isolated ids never become nodes.
    let mut ids: Vec<usize> = raw.iter().flat_map(|&(u, v)| [u, v]).collect();
    ids.sort_unstable();
    ids.dedup();
    let dense = |x: usize| ids.binary_search(&x).expect("id collected above");
    let mut self_loops = 0;
    let mut pairs = Vec::with_capacity(raw.len());
    for &(u, v) in &raw {
        if u == v {
            self_loops += 1;
        } else {
            pairs.push((dense(u), dense(v)));
        }
    }
    // Only ids that touch at least one real edge can enter the LCC.
    let mut touched = vec![false; ids.len()];
    for &(u, v) in &pairs {
        touched[u] = true;
        touched[v] = true;
    }
    let mut uf = UnionFind::new(ids.len());
    for &(u, v) in &pairs {
        uf.union(u, v);
    }
    let mut size = vec![0usize; ids.len()];
    for i in 0..ids.len() {
        if touched[i] {
            size[uf.find(i)] += 1;
        }
    }
    let (root, _) = size
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("at least one edge");
    let keep: Vec<usize> = (0..ids.len()).filter(|&i| touched[i] && uf.find(i) == root).collect();
    let mut new_id = vec![usize::MAX; ids.len()];
    for (k, &i) in keep.iter().enumerate() {
        new_id[i] = k;
    }
    let kept_pairs = pairs
        .iter()
        .filter(|&&(u, _)| new_id[u] != usize::MAX)
        .map(|&(u, v)| (new_id[u], new_id[v]));
    let (graph, duplicate_edges, _) = build_canonical(keep.len(), kept_pairs)?;
    let id_map = keep.iter().map(|&i| ids[i] as u64 + shift).collect();
    Ok(LoadedGraph {
        graph,
        id_map: Some(id_map),
        duplicate_edges,
        self_loops,
        dropped_nodes: ids.len() - keep.len(),
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> SparseGraph {
        SparseGraph::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    fn load(text: &str, options: LoadOptions) -> Result<LoadedGraph> {
        load_edge_list(text.as_bytes(), options)
    }

    #[test]
    fn loads_path() {
        let g = load("0 1\n1 2", LoadOptions::default()).unwrap().graph;
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.degrees(), vec![1, 2, 1]);
    }

    #[test]
    fn dedups_and_drops_self_loops() {
        let loaded = load("0 1\n1 0\n0 0", LoadOptions::default()).unwrap();
        assert_eq!(loaded.graph.node_count(), 2);
        assert_eq!(loaded.graph.edge_count(), 1);
        assert_eq!(loaded.duplicate_edges, 1);
        assert_eq!(loaded.self_loops, 1);
        assert!(loaded.id_map.is_none());
    }

    #[test]
    fn comments_blank_lines_and_commas() {
        let text = "# header\n\n  1,2\n2 3 \n";
        let loaded = load(text, LoadOptions { one_indexed: true, extract_lcc: false }).unwrap();
        assert_eq!(loaded.graph.degrees(), vec![1, 2, 1]);
        assert_eq!(loaded.id_map, Some(vec![1, 2, 3]));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match load("0 1\n1 x\n", LoadOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(load("0 1\n2\n", LoadOptions::default()), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(load("0 1 2\n", LoadOptions::default()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn isolated_node_is_rejected_without_lcc() {
        assert!(matches!(load("0 1\n3 4\n", LoadOptions::default()), Err(Error::IsolatedNode { node: 2 })));
        assert!(matches!(load("0 1\n2 2\n", LoadOptions::default()), Err(Error::IsolatedNode { node: 2 })));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(load("# nothing\n", LoadOptions::default()), Err(Error::EmptyGraph)));
        assert!(matches!(load("3 3\n", LoadOptions::default()), Err(Error::EmptyGraph)));
    }

    #[test]
    fn extracts_largest_component() {
        let text = "10 11\n20 21\n21 22\n22 20\n7 7\n";
        let loaded = load(text, LoadOptions { one_indexed: false, extract_lcc: true }).unwrap();
        assert_eq!(loaded.graph.node_count(), 3);
        assert_eq!(loaded.graph.edge_count(), 3);
        assert_eq!(loaded.id_map, Some(vec![20, 21, 22]));
        assert_eq!(loaded.dropped_nodes, 3);
        assert_eq!(loaded.self_loops, 1);
    }

    #[test]
    fn matvec_on_small_graphs() {
        let g = path(2);
        assert_eq!(g.random_walk_matvec(&[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(g.lazy_walk_matvec(&[1.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(g.lazy_walk_matvec(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);

        let star = SparseGraph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let y = star.random_walk_matvec(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(y[0], 0.0);
        for v in &y[1..] {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(matches!(g.random_walk_matvec(&[1.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(g.lazy_walk_matvec(&[1.0; 3]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn perturbation_examples() {
        let tri = SparseGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let cut = tri.perturb_edge(EdgePerturbation::remove(0, 1)).unwrap();
        assert_eq!(cut.degrees(), vec![1, 1, 2]);
        assert!(!cut.has_edge(0, 1) && cut.has_edge(1, 2) && cut.has_edge(0, 2));
        assert_eq!(tri.edge_count(), 3);

        assert!(path(2).perturb_edge(EdgePerturbation::remove(0, 1)).is_err());
        let closed = path(3).perturb_edge(EdgePerturbation::add(0, 2)).unwrap();
        assert_eq!(closed, tri);

        assert!(tri.perturb_edge(EdgePerturbation::add(0, 1)).is_err());
        assert!(path(3).perturb_edge(EdgePerturbation::remove(0, 2)).is_err());
        assert!(path(3).perturb_edge(EdgePerturbation::add(1, 1)).is_err());
        assert!(path(3).perturb_edge(EdgePerturbation::add(0, 9)).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let g = SparseGraph::from_edges(5, [(3, 1), (0, 4), (2, 1), (4, 2)]).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0 4\n1 2\n1 3\n2 4\n");
        let back = load_edge_list(buf.as_slice(), LoadOptions::default()).unwrap().graph;
        assert_eq!(back, g);
    }

    #[test]
    fn components_and_subgraph() {
        let g = SparseGraph::from_edges(5, [(0, 1), (2, 3), (3, 4)]).unwrap();
        assert_eq!(g.component_labels(), vec![0, 0, 1, 1, 1]);
        assert!(!g.is_connected());
        let sub = g.induced_subgraph(&[2, 3, 4]).unwrap();
        assert_eq!(sub.degrees(), vec![1, 2, 1]);
    }
}
