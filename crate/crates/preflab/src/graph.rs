//! Adjacency-matrix graphs, permutation-group actions, automorphism
//! enumeration, and seeded random-graph generation.
//!
//! A graph here is nothing but its 0/1 adjacency matrix: nodes carry no
//! attributes, so relabeling a graph by a permutation is the only identity
//! a node has. `Permutation` acts on graphs by
//! `(p(X))[i][j] = X[p⁻¹(i)][p⁻¹(j)]` and on per-node output matrices by
//! the same row shuffle.

use std::fmt;

use itertools::Itertools;
use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};

/// Graphs larger than this are rejected by exhaustive enumeration
/// (automorphism search runs over all n! permutations).
pub const EXHAUSTIVE_LIMIT: usize = 8;

/// An undirected, unattributed graph stored as a dense symmetric 0/1
/// adjacency matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Array2<u8>,
}

impl Graph {
    /// Build a graph from an edge list. Edges may be given in either
    /// orientation; self-loops are rejected, duplicates are idempotent.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Graph> {
        if n == 0 {
            return Err(Error::invalid("graph", "node count must be positive"));
        }
        let mut adj = Array2::<u8>::zeros((n, n));
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(
                    "edge",
                    format!("({u}, {v}) out of range for n = {n}"),
                ));
            }
            if u == v {
                return Err(Error::invalid("edge", format!("self-loop at node {u}")));
            }
            adj[(u, v)] = 1;
            adj[(v, u)] = 1;
        }
        Ok(Graph { n, adj })
    }

    /// Wrap an existing adjacency matrix, checking symmetry, zero diagonal,
    /// and 0/1 entries.
    pub fn from_adjacency(adj: Array2<u8>) -> Result<Graph> {
        let (r, c) = adj.dim();
        if r != c || r == 0 {
            return Err(Error::dim(format!("adjacency must be square and nonempty, got {r}x{c}")));
        }
        for i in 0..r {
            if adj[(i, i)] != 0 {
                return Err(Error::invalid("adjacency", format!("self-loop at node {i}")));
            }
            for j in 0..r {
                if adj[(i, j)] > 1 {
                    return Err(Error::invalid("adjacency", "entries must be 0 or 1"));
                }
                if adj[(i, j)] != adj[(j, i)] {
                    return Err(Error::invalid(
                        "adjacency",
                        format!("not symmetric at ({i}, {j})"),
                    ));
                }
            }
        }
        Ok(Graph { n: r, adj })
    }

    /// The cycle graph C_n.
    pub fn cycle(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, &edges).expect("cycle edges are valid")
    }

    /// The path graph 0-1-...-(n-1).
    pub fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Graph::from_edges(n, &edges).expect("path edges are valid")
    }

    /// The edgeless graph on n nodes.
    pub fn edgeless(n: usize) -> Graph {
        Graph::from_edges(n, &[]).expect("empty edge list is valid")
    }

    /// The complete graph K_n.
    pub fn complete(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).tuple_combinations().collect();
        Graph::from_edges(n, &edges).expect("complete edges are valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &Array2<u8> {
        &self.adj
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[(u, v)] == 1
    }

    /// Degree of node `v` (row sum of the adjacency matrix).
    pub fn degree(&self, v: usize) -> Result<usize> {
        if v >= self.n {
            return Err(Error::invalid(
                "node index",
                format!("{v} out of range for n = {}", self.n),
            ));
        }
        Ok(self.adj.row(v).iter().map(|&x| x as usize).sum())
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj.row(v).to_vec().into_iter().enumerate().filter_map(|(j, x)| (x == 1).then_some(j))
    }

    /// Edges as (u, v) with u < v, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                if self.adj[(u, v)] == 1 {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|&x| x as usize).sum::<usize>() / 2
    }
}

/// A bijection on node indices `[0, n)`. `map[i]` is where node `i` goes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Permutation {
        Permutation {
            map: (0..n).collect(),
        }
    }

    /// Validate that `map` is a bijection on `[0, n)`.
    pub fn from_map(map: Vec<usize>) -> Result<Permutation> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &x in &map {
            if x >= n {
                return Err(Error::invalid(
                    "permutation",
                    format!("image {x} out of range for n = {n}"),
                ));
            }
            if seen[x] {
                return Err(Error::invalid("permutation", format!("image {x} repeated")));
            }
            seen[x] = true;
        }
        Ok(Permutation { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &x)| i == x)
    }

    /// Where node `i` is sent.
    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.map.len()];
        for (i, &x) in self.map.iter().enumerate() {
            inv[x] = i;
        }
        Permutation { map: inv }
    }

    /// Composition `self ∘ inner`: applies `inner` first, then `self`.
    /// Satisfies `permute_graph(permute_graph(g, p), q) == permute_graph(g, q.compose(p))`.
    pub fn compose(&self, inner: &Permutation) -> Result<Permutation> {
        if self.len() != inner.len() {
            return Err(Error::dim(format!(
                "composing permutations of lengths {} and {}",
                self.len(),
                inner.len()
            )));
        }
        Ok(Permutation {
            map: inner.map.iter().map(|&x| self.map[x]).collect(),
        })
    }

    /// All permutations of `[0, n)` in lexicographic order of their map arrays.
    pub fn all(n: usize) -> impl Iterator<Item = Permutation> {
        (0..n).permutations(n).map(|map| Permutation { map })
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.map.iter().join(" "))
    }
}

/// Action of `p` on a graph: `result[i][j] = g[p⁻¹(i)][p⁻¹(j)]`.
pub fn permute_graph(g: &Graph, p: &Permutation) -> Result<Graph> {
    if p.len() != g.n {
        return Err(Error::dim(format!(
            "permutation of length {} on graph with {} nodes",
            p.len(),
            g.n
        )));
    }
    let inv = p.inverse();
    let mut adj = Array2::<u8>::zeros((g.n, g.n));
    for i in 0..g.n {
        for j in 0..g.n {
            adj[(i, j)] = g.adj[(inv.apply(i), inv.apply(j))];
        }
    }
    Ok(Graph { n: g.n, adj })
}

/// An n×k matrix of per-node class distributions: every row sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    values: Array2<f64>,
}

/// Row sums may deviate from 1 by at most this much.
pub const ROW_SUM_TOL: f64 = 1e-9;

impl PredictionMatrix {
    /// Validate row-stochasticity: entries in [0, 1], rows sum to 1 within
    /// `ROW_SUM_TOL`.
    pub fn new(values: Array2<f64>) -> Result<PredictionMatrix> {
        let (n, k) = values.dim();
        if n == 0 || k == 0 {
            return Err(Error::dim("prediction matrix must be nonempty"));
        }
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..k {
                let v = values[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(
                        "prediction matrix",
                        format!("entry ({i}, {j}) = {v} outside [0, 1]"),
                    ));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(
                    "prediction matrix",
                    format!("row {i} sums to {sum}"),
                ));
            }
        }
        Ok(PredictionMatrix { values })
    }

    /// One-hot rows: row i puts probability 1 on `classes[i]`.
    pub fn one_hot(classes: &[usize], k: usize) -> Result<PredictionMatrix> {
        let mut values = Array2::<f64>::zeros((classes.len(), k));
        for (i, &c) in classes.iter().enumerate() {
            if c >= k {
                return Err(Error::invalid(
                    "class label",
                    format!("{c} out of range for k = {k}"),
                ));
            }
            values[(i, c)] = 1.0;
        }
        PredictionMatrix::new(values)
    }

    /// n rows of the uniform distribution over k classes.
    pub fn uniform(n: usize, k: usize) -> PredictionMatrix {
        PredictionMatrix {
            values: Array2::from_elem((n, k), 1.0 / k as f64),
        }
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Argmax of row `i`, ties broken toward the lowest class index.
    pub fn argmax_row(&self, i: usize) -> usize {
        let row = self.values.row(i);
        let mut best = 0;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        best
    }

    pub fn max_abs_diff(&self, other: &PredictionMatrix) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Action of `p` on an output matrix: row `i` of the result is row `p⁻¹(i)`
/// of `y` (the same shuffle applied to graph rows).
pub fn permute_output(y: &PredictionMatrix, p: &Permutation) -> Result<PredictionMatrix> {
    if p.len() != y.rows() {
        return Err(Error::dim(format!(
            "permutation of length {} on matrix with {} rows",
            p.len(),
            y.rows()
        )));
    }
    let inv = p.inverse();
    let mut values = Array2::<f64>::zeros((y.rows(), y.cols()));
    for i in 0..y.rows() {
        values.row_mut(i).assign(&y.values.row(inv.apply(i)));
    }
    Ok(PredictionMatrix { values })
}

/// All automorphisms of `g`: every `p` with `permute_graph(g, p) == g`,
/// found by brute force over S_n. Identity is always included. Rejects
/// graphs above `EXHAUSTIVE_LIMIT`.
pub fn automorphisms(g: &Graph) -> Result<Vec<Permutation>> {
    automorphisms_with_limit(g, EXHAUSTIVE_LIMIT)
}

pub fn automorphisms_with_limit(g: &Graph, limit: usize) -> Result<Vec<Permutation>> {
    if g.n > limit {
        return Err(Error::ExhaustiveLimitExceeded { n: g.n, limit });
    }
    let mut out = Vec::new();
    for p in Permutation::all(g.n) {
        if permute_graph(g, &p)? == *g {
            out.push(p);
        }
    }
    Ok(out)
}

/// Erdős–Rényi G(n, p): each unordered pair is an edge independently with
/// probability `edge_prob`. Deterministic for a fixed generator state: pairs
/// are visited in row-major order, one draw each.
pub fn generate_random_graph<R: Rng>(n: usize, edge_prob: f64, rng: &mut R) -> Result<Graph> {
    if n < 2 {
        return Err(Error::invalid("node count", format!("{n} < 2")));
    }
    if !(edge_prob > 0.0 && edge_prob < 1.0) {
        return Err(Error::invalid(
            "edge probability",
            format!("{edge_prob} not in (0, 1)"),
        ));
    }
    let mut adj = Array2::<u8>::zeros((n, n));
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < edge_prob {
                adj[(u, v)] = 1;
                adj[(v, u)] = 1;
            }
        }
    }
    Ok(Graph { n, adj })
}

/// Parse the edge-list text format: first line `n m`, then `m` lines `u v`
/// with `u < v`, 0-indexed. Rejects self-loops, duplicate edges, and
/// malformed lines.
pub fn read_edge_list(text: &str) -> Result<Graph> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty input, expected 'n m' header"))?;
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(1, "expected node count"))?;
    let m: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(1, "expected edge count"))?;
    if parts.next().is_some() {
        return Err(Error::parse(1, "trailing tokens after 'n m'"));
    }
    if n == 0 {
        return Err(Error::parse(1, "node count must be positive"));
    }

    let mut adj = Array2::<u8>::zeros((n, n));
    let mut seen = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let u: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(lineno, "expected node index"))?;
        let v: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(lineno, "expected node index"))?;
        if parts.next().is_some() {
            return Err(Error::parse(lineno, "trailing tokens after edge"));
        }
        if u >= v {
            return Err(Error::parse(
                lineno,
                format!("edges must satisfy u < v, got {u} {v}"),
            ));
        }
        if v >= n {
            return Err(Error::parse(lineno, format!("node {v} out of range")));
        }
        if adj[(u, v)] == 1 {
            return Err(Error::parse(lineno, format!("duplicate edge {u} {v}")));
        }
        adj[(u, v)] = 1;
        adj[(v, u)] = 1;
        seen += 1;
    }
    if seen != m {
        return Err(Error::parse(
            0,
            format!("header declared {m} edges but found {seen}"),
        ));
    }
    Ok(Graph { n, adj })
}

/// Inverse of [`read_edge_list`]: `n m` header then one `u v` line per edge,
/// u < v, LF line endings.
pub fn write_edge_list(g: &Graph) -> String {
    let edges = g.edges();
    let mut out = format!("{} {}\n", g.n, edges.len());
    for (u, v) in edges {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}
