//! Oracles and generators shared by the integration suites. Everything here
//! is deliberately written as the dumbest correct algorithm available —
//! plain exhaustive scans with no pruning — so the library's cleverer
//! implementations have something independent to be measured against.
#![allow(dead_code)]

use preflab::graph::{Graph, PredictionMatrix};
use preflab::labeling::{deterministic_assignment, EmbeddingAssignment, NodeGroups, Strategy};
use preflab::nn::{backward, forward, forward_cached, kl_node_loss, Architecture, NodeClassifier, TableSpec};
use preflab::sat::CnfFormula;
use preflab::seed::stream;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Maximum independent set by scanning all 2^n subsets. Ties prefer the
/// lexicographically smallest sorted node list, the same rule the library
/// declares, so witnesses can be compared exactly and not just by size.
pub fn exhaustive_mis(g: &Graph) -> (usize, Vec<usize>) {
    let n = g.n();
    assert!(n <= 20, "oracle is O(2^n * n^2); keep n small");
    let mut best: Option<Vec<usize>> = None;
    for mask in 0u32..(1u32 << n) {
        let nodes: Vec<usize> = (0..n).filter(|v| mask >> v & 1 == 1).collect();
        let independent = nodes
            .iter()
            .enumerate()
            .all(|(i, &u)| nodes[i + 1..].iter().all(|&v| !g.has_edge(u, v)));
        if !independent {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => nodes.len() > b.len() || (nodes.len() == b.len() && nodes < *b),
        };
        if better {
            best = Some(nodes);
        }
    }
    let set = best.expect("the empty set is always independent");
    (set.len(), set)
}

/// Satisfiability by scanning all 2^V assignments in numeric order
/// (bit v-1 of the counter is variable v). Returns the first satisfying
/// assignment, if any.
pub fn truth_table_solve(f: &CnfFormula) -> Option<Vec<bool>> {
    let v = f.num_vars();
    assert!(v <= 20, "oracle is O(2^V * formula size); keep V small");
    'outer: for bits in 0u64..(1u64 << v) {
        let assignment: Vec<bool> = (0..v).map(|i| bits >> i & 1 == 1).collect();
        for clause in f.clauses() {
            let satisfied = clause.iter().any(|&lit| {
                let var = lit.unsigned_abs() as usize - 1;
                assignment[var] == (lit > 0)
            });
            if !satisfied {
                continue 'outer;
            }
        }
        return Some(assignment);
    }
    None
}

/// Worst relative error between the analytic gradient and central finite
/// differences (step `h`), over every entry of every parameter tensor.
/// Dropout must be off in `model`'s architecture.
pub fn fd_worst_relative_error(
    model: &mut NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    a: &EmbeddingAssignment,
    target: &PredictionMatrix,
    h: f64,
) -> f64 {
    let (_, cache) = forward_cached(model, g, groups, a).expect("forward");
    let grads = backward(model, g, groups, a, target, None, &cache).expect("backward");
    let names: Vec<String> = grads.iter().map(|(n, _)| n.to_string()).collect();
    let mut worst = 0.0_f64;
    for name in &names {
        let (rows, cols) = {
            let t = grads.get(name);
            (t.nrows(), t.ncols())
        };
        for i in 0..rows {
            for j in 0..cols {
                let orig = model.params().get(name)[(i, j)];
                model.params_mut().get_mut(name)[(i, j)] = orig + h;
                let up = loss_at(model, g, groups, a, target);
                model.params_mut().get_mut(name)[(i, j)] = orig - h;
                let down = loss_at(model, g, groups, a, target);
                model.params_mut().get_mut(name)[(i, j)] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = grads.get(name)[(i, j)];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
    }
    worst
}

fn loss_at(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    a: &EmbeddingAssignment,
    target: &PredictionMatrix,
) -> f64 {
    let pred = forward(model, g, groups, a).expect("forward");
    kl_node_loss(&pred, target, None).expect("loss")
}

/// A small single-table model for property tests: the theorem-level
/// guarantees hold for arbitrary weights, so any seeded init works.
pub fn single_table_model(rows: usize, hidden: usize, layers: usize, seed: u64) -> NodeClassifier {
    let arch = Architecture {
        layers,
        hidden,
        classes: 2,
        tables: vec![TableSpec::new("nodes", rows)],
        dropout: 0.0,
    };
    NodeClassifier::init(arch, &mut stream(seed, "test-model", &[])).expect("init")
}

/// A connected-ish random graph; retries until at least one edge exists so
/// degree-based strategies have something to rank.
pub fn random_graph(n: usize, edge_prob: f64, rng: &mut ChaCha8Rng) -> Graph {
    loop {
        let g = preflab::graph::generate_random_graph(n, edge_prob, rng).expect("generate");
        if g.edge_count() > 0 {
            return g;
        }
    }
}

/// Random one-hot targets over two classes.
pub fn random_targets(n: usize, rng: &mut ChaCha8Rng) -> PredictionMatrix {
    let classes: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
    PredictionMatrix::one_hot(&classes, 2).expect("one-hot")
}

/// Random width-3 CNF over `vars` variables with distinct variables per
/// clause — the same clause shape the generator emits, built independently.
pub fn random_formula(vars: usize, clauses: usize, rng: &mut ChaCha8Rng) -> CnfFormula {
    let cl: Vec<Vec<i32>> = (0..clauses)
        .map(|_| {
            let picked = rand::seq::index::sample(rng, vars, 3.min(vars));
            picked
                .iter()
                .map(|v| {
                    let lit = (v + 1) as i32;
                    if rng.random::<bool>() { lit } else { -lit }
                })
                .collect()
        })
        .collect();
    CnfFormula::new(vars, cl).expect("well-formed clauses")
}

/// The Static (position) assignment — the base labeling most tests permute.
pub fn static_assignment(g: &Graph, groups: &NodeGroups) -> EmbeddingAssignment {
    deterministic_assignment(Strategy::Static, g, groups).expect("static assignment")
}
