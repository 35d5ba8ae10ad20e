//! Embedding-assignment strategies: how each node of an unattributed graph
//! is matched to a row of the model's embedding table (or to a scalar
//! feature). The assignment is pure artefact — the graph carries no node
//! identity — which is exactly why it matters: the strategies here are the
//! baselines and the sampled-permutation machinery that the training and
//! inference loops compare.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, Permutation};

/// How nodes receive their input representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Every node gets embedding row 0.
    Same,
    /// Node at in-group position i gets row i.
    Static,
    /// Rows assigned by a fresh uniform permutation each draw.
    Random,
    /// No table: scalar feature 1/(degree + 1) per node.
    DegreeFeature,
    /// Node with the i-th largest degree gets row i (degree ties broken by
    /// ascending node index).
    DegreeRanking,
    /// Random assignment, but training evaluates K draws per example and
    /// inference searches over draws; a single draw is identical to Random.
    Preferential,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Same,
        Strategy::Static,
        Strategy::Random,
        Strategy::DegreeFeature,
        Strategy::DegreeRanking,
        Strategy::Preferential,
    ];

    /// Config/CLI key for this strategy.
    pub fn key(self) -> &'static str {
        match self {
            Strategy::Same => "same",
            Strategy::Static => "static",
            Strategy::Random => "random",
            Strategy::DegreeFeature => "degree_feature",
            Strategy::DegreeRanking => "degree_rank",
            Strategy::Preferential => "preferential",
        }
    }

    /// Whether a single assignment draw depends on the generator.
    pub fn is_randomized(self) -> bool {
        matches!(self, Strategy::Random | Strategy::Preferential)
    }

    /// Whether nodes are represented by a scalar feature instead of an
    /// embedding-table row.
    pub fn uses_scalar_feature(self) -> bool {
        matches!(self, Strategy::DegreeFeature)
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Strategy> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.key() == s)
            .ok_or_else(|| {
                Error::invalid(
                    "strategy",
                    format!(
                        "unknown key {s:?}, expected one of {}",
                        Strategy::ALL.iter().map(|k| k.key()).join("|")
                    ),
                )
            })
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// A partition of the node range `[0, n)` into contiguous blocks. Plain
/// graphs have one block; bipartite task graphs (e.g. literals vs. clauses)
/// use one block per node kind, so each kind draws from its own embedding
/// table and its own permutations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeGroups {
    /// Block start offsets plus a final sentinel equal to n.
    bounds: Vec<usize>,
}

impl NodeGroups {
    /// One block covering all n nodes.
    pub fn single(n: usize) -> NodeGroups {
        NodeGroups { bounds: vec![0, n] }
    }

    /// Consecutive blocks of the given sizes; all must be nonzero.
    pub fn from_sizes(sizes: &[usize]) -> Result<NodeGroups> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::invalid("node groups", "block sizes must be nonzero"));
        }
        let mut bounds = vec![0];
        for &s in sizes {
            bounds.push(bounds.last().unwrap() + s);
        }
        Ok(NodeGroups { bounds })
    }

    pub fn n(&self) -> usize {
        *self.bounds.last().unwrap()
    }

    pub fn group_count(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn group_size(&self, g: usize) -> usize {
        self.bounds[g + 1] - self.bounds[g]
    }

    /// The node range of block `g`.
    pub fn range(&self, g: usize) -> std::ops::Range<usize> {
        self.bounds[g]..self.bounds[g + 1]
    }

    /// Which block node `v` belongs to.
    pub fn group_of(&self, v: usize) -> usize {
        debug_assert!(v < self.n());
        self.bounds.partition_point(|&b| b <= v) - 1
    }

    /// Position of node `v` inside its block.
    pub fn offset_within(&self, v: usize) -> usize {
        v - self.bounds[self.group_of(v)]
    }

    /// Number of distinct within-block permutations (product of block
    /// factorials), or None on overflow.
    pub fn permutation_count(&self) -> Option<u128> {
        let mut total: u128 = 1;
        for g in 0..self.group_count() {
            for k in 1..=self.group_size(g) as u128 {
                total = total.checked_mul(k)?;
            }
        }
        Some(total)
    }
}

/// The product of one embedding assignment per node.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingAssignment {
    /// `rows[v]` is the embedding-table row for node v, counted within v's
    /// block (each block has its own table).
    Indexed(Vec<usize>),
    /// `features[v]` is a scalar input for node v, projected into model
    /// width by a learned map.
    Features(Vec<f64>),
}

impl EmbeddingAssignment {
    pub fn len(&self) -> usize {
        match self {
            EmbeddingAssignment::Indexed(rows) => rows.len(),
            EmbeddingAssignment::Features(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Assignment for strategies that don't consult a generator. For `Random`
/// and `Preferential` use [`assign`], or permute the graph and take the
/// `Static` assignment — the two views are equivalent.
pub fn deterministic_assignment(
    strategy: Strategy,
    g: &Graph,
    groups: &NodeGroups,
) -> Result<EmbeddingAssignment> {
    check_groups(g, groups)?;
    match strategy {
        Strategy::Same => Ok(EmbeddingAssignment::Indexed(vec![0; g.n()])),
        Strategy::Static => Ok(EmbeddingAssignment::Indexed(
            (0..g.n()).map(|v| groups.offset_within(v)).collect(),
        )),
        Strategy::DegreeFeature => {
            let feats = (0..g.n())
                .map(|v| 1.0 / (g.degree(v).expect("v < n") as f64 + 1.0))
                .collect();
            Ok(EmbeddingAssignment::Features(feats))
        }
        Strategy::DegreeRanking => {
            let mut rows = vec![0usize; g.n()];
            for gi in 0..groups.group_count() {
                // Sort the block's nodes by degree descending; equal degrees
                // keep ascending node order (stable sort on the negated key).
                let mut nodes: Vec<usize> = groups.range(gi).collect();
                nodes.sort_by_key(|&v| std::cmp::Reverse(g.degree(v).expect("v < n")));
                for (rank, &v) in nodes.iter().enumerate() {
                    rows[v] = rank;
                }
            }
            Ok(EmbeddingAssignment::Indexed(rows))
        }
        Strategy::Random | Strategy::Preferential => Err(Error::invalid(
            "strategy",
            format!("{strategy} needs a generator; use assign()"),
        )),
    }
}

/// One embedding assignment under `strategy`. Consumes randomness only for
/// `Random`/`Preferential` (one within-block shuffle per block).
pub fn assign<R: Rng>(
    strategy: Strategy,
    g: &Graph,
    groups: &NodeGroups,
    rng: &mut R,
) -> Result<EmbeddingAssignment> {
    match strategy {
        Strategy::Random | Strategy::Preferential => {
            check_groups(g, groups)?;
            let p = sample_grouped_permutation(groups, rng);
            // Row of node v = its position after relabeling by p, within its
            // block: exactly the Static assignment of the permuted graph.
            Ok(EmbeddingAssignment::Indexed(
                (0..g.n()).map(|v| groups.offset_within(p.apply(v))).collect(),
            ))
        }
        _ => deterministic_assignment(strategy, g, groups),
    }
}

fn check_groups(g: &Graph, groups: &NodeGroups) -> Result<()> {
    if groups.n() != g.n() {
        return Err(Error::dim(format!(
            "node groups cover {} nodes but graph has {}",
            groups.n(),
            g.n()
        )));
    }
    Ok(())
}

/// Uniform draw from S_n via Fisher–Yates.
pub fn sample_permutation<R: Rng>(n: usize, rng: &mut R) -> Result<Permutation> {
    if n == 0 {
        return Err(Error::invalid("permutation length", "must be at least 1"));
    }
    let mut map: Vec<usize> = (0..n).collect();
    map.shuffle(rng);
    Permutation::from_map(map)
}

/// Uniform draw from the block-permutation subgroup: each block is shuffled
/// independently (in block order), nodes never cross blocks.
pub fn sample_grouped_permutation<R: Rng>(groups: &NodeGroups, rng: &mut R) -> Permutation {
    let mut map: Vec<usize> = (0..groups.n()).collect();
    for g in 0..groups.group_count() {
        map[groups.range(g)].shuffle(rng);
    }
    Permutation::from_map(map).expect("blockwise shuffle of identity is a bijection")
}

/// All block permutations, ordered lexicographically by map array. For a
/// single block this is all of S_n. The count is the product of block
/// factorials — callers must bound block sizes.
pub fn grouped_permutations(groups: &NodeGroups) -> Vec<Permutation> {
    let per_group: Vec<Vec<Vec<usize>>> = (0..groups.group_count())
        .map(|g| {
            let r = groups.range(g);
            r.clone().permutations(r.len()).collect()
        })
        .collect();
    per_group
        .into_iter()
        .multi_cartesian_product()
        .map(|blocks| Permutation::from_map(blocks.concat()).expect("blockwise maps are bijections"))
        .collect()
}
