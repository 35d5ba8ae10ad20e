//! The group actions everything else is built on: relabeling a graph,
//! relabeling a prediction, composing/inverting permutations, and
//! enumerating a graph's automorphisms.

use preflab::graph::{automorphisms, permute_graph, permute_output, Graph, Permutation, PredictionMatrix};

fn main() -> preflab::Result<()> {
    // A 4-cycle: every node looks alike, so it has plenty of symmetry.
    let c4 = Graph::cycle(4);
    println!("C4 edges: {:?}", c4.edges());

    let pi = Permutation::from_map(vec![1, 2, 3, 0])?; // rotate left
    let rotated = permute_graph(&c4, &pi)?;
    println!("rotated by {pi}: edges {:?} (same cycle, relabeled)", rotated.edges());

    // Composition and inverse behave like function application: applying
    // pi then sigma equals applying (sigma ∘ pi) at once.
    let sigma = Permutation::from_map(vec![0, 2, 1, 3])?;
    let two_steps = permute_graph(&permute_graph(&c4, &pi)?, &sigma)?;
    let composed = sigma.compose(&pi)?;
    let one_step = permute_graph(&c4, &composed)?;
    assert_eq!(two_steps.adjacency(), one_step.adjacency());
    println!("sigma∘pi = {composed}");
    println!("pi⁻¹     = {}", pi.inverse());

    // Output rows move with their nodes: row pi(v) of the permuted output
    // is row v of the original.
    let probs = PredictionMatrix::one_hot(&[0, 1, 0, 1], 2)?;
    let moved = permute_output(&probs, &pi)?;
    for v in 0..4 {
        assert_eq!(moved.get(pi.apply(v), 1), probs.get(v, 1));
    }
    println!("output rows follow their nodes under {pi}");

    // The cycle's automorphism group: 4 rotations × 2 reflections.
    let autos = automorphisms(&c4)?;
    println!("C4 has {} automorphisms:", autos.len());
    for a in &autos {
        println!("  {a}");
    }

    // A rigid graph by contrast has only the identity.
    let rigid = Graph::from_edges(7, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (2, 6)])?;
    println!("asymmetric tree has {} automorphism(s)", automorphisms(&rigid)?.len());
    Ok(())
}
