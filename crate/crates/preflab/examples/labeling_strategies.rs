//! Every embedding-assignment strategy on the same graph, side by side:
//! which embedding-table row each node reads, and how randomized
//! strategies differ per draw while deterministic ones never move.

use preflab::labeling::{assign, deterministic_assignment, EmbeddingAssignment, NodeGroups, Strategy};
use preflab::graph::Graph;
use preflab::seed::stream;

fn show(name: &str, a: &EmbeddingAssignment) {
    match a {
        EmbeddingAssignment::Indexed(rows) => println!("{name:16} rows    {rows:?}"),
        EmbeddingAssignment::Features(feats) => {
            let rounded: Vec<String> = feats.iter().map(|f| format!("{f:.3}")).collect();
            println!("{name:16} scalar  [{}]", rounded.join(", "));
        }
    }
}

fn main() -> preflab::Result<()> {
    // A path with a pendant: degrees 1,3,2,1,1 — enough variety for the
    // degree-based strategies to have something to sort.
    let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (1, 4)])?;
    let groups = NodeGroups::single(g.n());
    println!("graph edges: {:?}", g.edges());
    println!("degrees:     {:?}\n", (0..5).map(|v| g.degree(v).unwrap()).collect::<Vec<_>>());

    for strategy in [Strategy::Same, Strategy::Static, Strategy::DegreeFeature, Strategy::DegreeRanking] {
        show(strategy.key(), &deterministic_assignment(strategy, &g, &groups)?);
    }

    // Randomized strategies re-draw the assignment every call.
    let mut rng = stream(7, "demo", &[]);
    for draw in 0..3 {
        let a = assign(Strategy::Random, &g, &groups, &mut rng)?;
        show(&format!("random #{draw}"), &a);
    }

    // Grouped graphs permute within each block only: the first block's
    // nodes always read rows 0..4, the second block's rows 4..6.
    let grouped = NodeGroups::from_sizes(&[4, 2])?;
    let g2 = Graph::from_edges(6, &[(0, 4), (1, 4), (2, 5), (3, 5)])?;
    println!("\ntwo groups of sizes [4, 2]:");
    for draw in 0..3 {
        let a = assign(Strategy::Preferential, &g2, &grouped, &mut rng)?;
        show(&format!("preferential #{draw}"), &a);
    }
    Ok(())
}
