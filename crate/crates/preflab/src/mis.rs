//! Maximum-independent-set benchmark: exact branch-and-bound oracle for
//! ground truth, random-graph dataset generation, greedy decoding of model
//! probabilities into an always-independent set, and the solved-exactly
//! accuracy metric.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{generate_random_graph, Graph, PredictionMatrix};
use crate::infer::{predict_with_mode, InferenceMode, Prediction};
use crate::labeling::{NodeGroups, Strategy};
use crate::nn::NodeClassifier;
use crate::seed::stream;
use crate::train::TrainSample;

/// Branch-and-bound is budgeted to graphs of at most this many nodes.
pub const MIS_ORACLE_LIMIT: usize = 30;

/// One labeled benchmark instance. The label is a single optimal set even
/// when several exist — the lexicographically smallest, so datasets are
/// reproducible and label ambiguity is a modeling problem, not an I/O one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MisInstance {
    pub graph: Graph,
    pub optimal_size: usize,
    /// Ascending node indices of the chosen optimal independent set.
    pub label_set: Vec<usize>,
}

impl MisInstance {
    pub fn new(graph: Graph, optimal_size: usize, label_set: Vec<usize>) -> Result<MisInstance> {
        if label_set.len() != optimal_size {
            return Err(Error::invalid(
                "mis instance",
                format!(
                    "label set has {} nodes but optimal size is {optimal_size}",
                    label_set.len()
                ),
            ));
        }
        if label_set.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("mis instance", "label set must be strictly ascending"));
        }
        if let Some(&max) = label_set.last() {
            if max >= graph.n() {
                return Err(Error::invalid(
                    "mis instance",
                    format!("label node {max} out of range"),
                ));
            }
        }
        if !is_independent(&graph, &label_set) {
            return Err(Error::invalid("mis instance", "label set is not independent"));
        }
        Ok(MisInstance {
            graph,
            optimal_size,
            label_set,
        })
    }

    /// Two classes per node: class 1 = in the set, class 0 = out.
    pub fn to_train_sample(&self) -> TrainSample {
        let classes: Vec<usize> = (0..self.graph.n())
            .map(|v| usize::from(self.label_set.binary_search(&v).is_ok()))
            .collect();
        TrainSample::new(
            self.graph.clone(),
            NodeGroups::single(self.graph.n()),
            PredictionMatrix::one_hot(&classes, 2).expect("binary one-hot targets"),
            None,
        )
        .expect("instance dimensions are consistent")
    }
}

pub fn is_independent(g: &Graph, nodes: &[usize]) -> bool {
    for (i, &u) in nodes.iter().enumerate() {
        for &v in &nodes[i + 1..] {
            if g.has_edge(u, v) {
                return false;
            }
        }
    }
    true
}

struct BitmaskSolver {
    nbr: Vec<u64>,
}

impl BitmaskSolver {
    fn new(g: &Graph) -> BitmaskSolver {
        let nbr = (0..g.n())
            .map(|v| g.neighbors(v).fold(0u64, |m, u| m | (1 << u)))
            .collect();
        BitmaskSolver { nbr }
    }

    /// Size of a maximum independent set within `avail`.
    fn max_size(&self, avail: u64) -> usize {
        let mut best = 0;
        self.search(avail, 0, &mut best);
        best
    }

    fn search(&self, avail: u64, current: usize, best: &mut usize) {
        if current + avail.count_ones() as usize <= *best {
            return; // even taking everything left cannot beat the incumbent
        }
        if avail == 0 {
            *best = current;
            return;
        }
        // Branch on the available node with the most available neighbors:
        // including it clears the most, excluding it prunes hard cases early.
        let mut v = 0;
        let mut vdeg = usize::MAX;
        let mut bits = avail;
        let mut maxdeg = 0;
        while bits != 0 {
            let u = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let deg = (self.nbr[u] & avail).count_ones() as usize;
            if vdeg == usize::MAX || deg > maxdeg {
                v = u;
                maxdeg = deg;
                vdeg = deg;
            }
        }
        self.search(avail & !(self.nbr[v] | (1 << v)), current + 1, best);
        self.search(avail & !(1 << v), current, best);
    }
}

/// Exact maximum independent set: the optimal size and the
/// lexicographically smallest optimal node set. Budgeted to
/// [`MIS_ORACLE_LIMIT`] nodes.
pub fn brute_force_mis(g: &Graph) -> Result<(usize, Vec<usize>)> {
    let n = g.n();
    if n > MIS_ORACLE_LIMIT {
        return Err(Error::BudgetExceeded {
            op: "brute_force_mis",
            why: format!("graph has {n} nodes, budget is {MIS_ORACLE_LIMIT}"),
        });
    }
    let solver = BitmaskSolver::new(g);
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let total = solver.max_size(full);

    // Lexicographic witness: keep node v exactly when some optimal set
    // extends the current prefix through v.
    let mut witness = Vec::with_capacity(total);
    let mut avail = full;
    for v in 0..n {
        if avail & (1 << v) == 0 {
            continue;
        }
        let with_v = avail & !(solver.nbr[v] | (1 << v));
        if witness.len() + 1 + solver.max_size(with_v) == total {
            witness.push(v);
            avail = with_v;
        } else {
            avail &= !(1 << v);
        }
    }
    debug_assert_eq!(witness.len(), total);
    Ok((total, witness))
}

/// Turn per-node probabilities into an independent set: visit nodes by
/// descending class-1 probability (ties by ascending node index), keep a
/// node unless a kept node already removed it, and remove its neighbors.
/// The removal rule makes the output independent for EVERY input.
pub fn greedy_decode(pred: &Prediction, g: &Graph) -> Vec<usize> {
    let n = g.n();
    debug_assert_eq!(pred.matrix.rows(), n);
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort + ascending-index layout ⇒ ties keep the lower index first.
    order.sort_by(|&a, &b| {
        pred.matrix
            .get(b, 1)
            .partial_cmp(&pred.matrix.get(a, 1))
            .expect("probabilities are finite")
    });
    let mut removed = vec![false; n];
    let mut chosen = Vec::new();
    for v in order {
        if removed[v] {
            continue;
        }
        chosen.push(v);
        removed[v] = true;
        for u in g.neighbors(v) {
            removed[u] = true;
        }
    }
    chosen.sort_unstable();
    chosen
}

/// `count` labeled instances on G(n, edge_prob) graphs with n uniform in
/// `n_range` (inclusive). Instance i depends only on (seed, i), so the
/// dataset is reproducible and parallel generation is order-independent.
pub fn generate_mis_dataset(
    count: usize,
    n_range: (usize, usize),
    edge_prob: f64,
    seed: u64,
) -> Result<Vec<MisInstance>> {
    let (lo, hi) = n_range;
    if lo < 2 || lo > hi {
        return Err(Error::invalid(
            "mis dataset",
            format!("node range [{lo}, {hi}] must satisfy 2 <= lo <= hi"),
        ));
    }
    if hi > MIS_ORACLE_LIMIT {
        return Err(Error::BudgetExceeded {
            op: "generate_mis_dataset",
            why: format!("max nodes {hi} exceeds oracle budget {MIS_ORACLE_LIMIT}"),
        });
    }
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "mis-gen", &[i as u64]);
            let n = rand::Rng::random_range(&mut rng, lo..=hi);
            let graph = generate_random_graph(n, edge_prob, &mut rng)?;
            let (size, witness) = brute_force_mis(&graph)?;
            MisInstance::new(graph, size, witness)
        })
        .collect()
}

/// Fraction of instances where the decoded set has optimal size (it is
/// independent by construction, so size is the whole test). Instance i's
/// inference randomness comes from (seed, i).
pub fn evaluate_mis(
    model: &NodeClassifier,
    strategy: Strategy,
    instances: &[MisInstance],
    mode: InferenceMode,
    m: usize,
    seed: u64,
) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let solved: Vec<Result<bool>> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let mut rng = stream(seed, "mis-eval", &[i as u64]);
            let groups = NodeGroups::single(inst.graph.n());
            let pred =
                predict_with_mode(model, &inst.graph, &groups, strategy, mode, m, &mut rng)?;
            let set = greedy_decode(&pred, &inst.graph);
            Ok(set.len() == inst.optimal_size)
        })
        .collect();
    let mut hits = 0usize;
    for s in solved {
        hits += usize::from(s?);
    }
    Ok(hits as f64 / instances.len() as f64)
}

/// Dataset text format: `mis-dataset v1 <count>` then per instance an
/// `instance <idx>` line, an edge list (`n m` header + `u v` lines), an
/// `optimal <size>` line, and a `witness <v...>` line.
pub fn write_mis_dataset(instances: &[MisInstance]) -> String {
    let mut out = format!("mis-dataset v1 {}\n", instances.len());
    for (i, inst) in instances.iter().enumerate() {
        out.push_str(&format!("instance {i}\n"));
        out.push_str(&crate::graph::write_edge_list(&inst.graph));
        out.push_str(&format!("optimal {}\n", inst.optimal_size));
        out.push_str("witness");
        for v in &inst.label_set {
            out.push_str(&format!(" {v}"));
        }
        out.push('\n');
    }
    out
}

pub fn read_mis_dataset(text: &str) -> Result<Vec<MisInstance>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("unexpected end of dataset, wanted {what}")))
    };

    let (ln, header) = next("header")?;
    let count: usize = header
        .strip_prefix("mis-dataset v1 ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(ln, "expected 'mis-dataset v1 <count>'"))?;

    let mut instances = Vec::with_capacity(count);
    for idx in 0..count {
        let (ln, line) = next("instance header")?;
        let got: usize = line
            .strip_prefix("instance ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(ln, "expected 'instance <idx>'"))?;
        if got != idx {
            return Err(Error::parse(ln, format!("instance {got} out of order, expected {idx}")));
        }

        let (ln, line) = next("edge-list header")?;
        let (n, m) = line
            .split_once(' ')
            .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
            .ok_or_else(|| Error::parse(ln, "expected 'n m'"))?;
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(m);
        for _ in 0..m {
            let (ln, line) = next("edge")?;
            let (u, v) = line
                .split_once(' ')
                .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                .ok_or_else(|| Error::parse(ln, "expected 'u v'"))?;
            if u >= v {
                return Err(Error::parse(ln, format!("edges must satisfy u < v, got {u} {v}")));
            }
            edges.push((u, v));
        }
        let graph = Graph::from_edges(n, &edges)?;

        let (ln, line) = next("optimal size")?;
        let optimal: usize = line
            .strip_prefix("optimal ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(ln, "expected 'optimal <size>'"))?;

        let (ln, line) = next("witness")?;
        let rest = line
            .strip_prefix("witness")
            .ok_or_else(|| Error::parse(ln, "expected 'witness <nodes...>'"))?;
        let mut label_set = Vec::with_capacity(optimal);
        for tok in rest.split_whitespace() {
            label_set.push(
                tok.parse()
                    .map_err(|_| Error::parse(ln, format!("bad node index {tok:?}")))?,
            );
        }
        instances
            .push(MisInstance::new(graph, optimal, label_set).map_err(|e| e.in_stage("mis dataset read"))?);
    }
    Ok(instances)
}
