//! Relabeling the input graph should only relabel the prediction — up to a
//! symmetry of the graph itself. This holds for any weights when inference
//! searches all labelings with deterministic tie-breaking; watch it hold on
//! a symmetric graph (nontrivial witness) and a rigid one (identity
//! witness).

use preflab::graph::{automorphisms, Graph, Permutation};
use preflab::infer::{check_generalized_equivariance, exhaustive_equivariance_report};
use preflab::nn::{Architecture, NodeClassifier, TableSpec};
use preflab::seed::stream;

fn fresh_model(rows: usize) -> preflab::Result<NodeClassifier> {
    let arch = Architecture {
        layers: 3,
        hidden: 8,
        classes: 2,
        tables: vec![TableSpec::new("nodes", rows)],
        dropout: 0.0,
    };
    NodeClassifier::init(arch, &mut stream(23, "equivariance-demo", &[]))
}

fn main() -> preflab::Result<()> {
    let model = fresh_model(7)?;

    // C5 has 10 automorphisms; permuting it usually needs a nontrivial
    // witness gamma to line the outputs back up.
    let c5 = Graph::cycle(5);
    println!("C5: {} automorphisms", automorphisms(&c5)?.len());
    let pi = Permutation::from_map(vec![2, 0, 4, 1, 3])?;
    let check = check_generalized_equivariance(&model, &c5, &pi)?;
    println!(
        "  pi = {pi}: holds = {}, witness gamma = {}",
        check.holds,
        check.witness.as_ref().map(|w| w.to_string()).unwrap_or_default()
    );

    // A rigid tree has only the identity automorphism, so the witness must
    // be the identity: the prediction is permuted exactly as the input was.
    let rigid = Graph::from_edges(7, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (2, 6)])?;
    println!("rigid tree: {} automorphism", automorphisms(&rigid)?.len());
    let pi = Permutation::from_map(vec![3, 6, 0, 5, 2, 4, 1])?;
    let check = check_generalized_equivariance(&model, &rigid, &pi)?;
    println!(
        "  pi = {pi}: holds = {}, witness gamma = {}",
        check.holds,
        check.witness.as_ref().map(|w| w.to_string()).unwrap_or_default()
    );

    // Exhaustively: every one of the n! input permutations, for several
    // random graphs.
    for (i, p) in [(0usize, 0.3), (1, 0.5), (2, 0.7)] {
        let mut rng = stream(23, "equivariance-corpus", &[i as u64]);
        let g = preflab::graph::generate_random_graph(5, p, &mut rng)?;
        let report = exhaustive_equivariance_report(&model, &g)?;
        println!(
            "random graph {i} (p = {p}): {} permutations checked, {} failures",
            report.checked,
            report.failures.len()
        );
        assert!(report.all_hold());
    }
    println!("generalized equivariance held everywhere");
    Ok(())
}
