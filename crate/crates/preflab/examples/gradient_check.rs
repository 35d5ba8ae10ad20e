//! The backward pass is written by hand, so check it the honest way:
//! perturb every single parameter, measure the loss with central finite
//! differences, and compare against the analytic gradient.

use preflab::graph::{generate_random_graph, Graph, PredictionMatrix};
use preflab::labeling::{deterministic_assignment, EmbeddingAssignment, NodeGroups, Strategy};
use preflab::nn::{backward, forward, forward_cached, kl_node_loss, Architecture, NodeClassifier, TableSpec};
use preflab::seed::stream;
use rand::Rng;

fn loss_of(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    a: &EmbeddingAssignment,
    target: &PredictionMatrix,
) -> preflab::Result<f64> {
    kl_node_loss(&forward(model, g, groups, a)?, target, None)
}

fn main() -> preflab::Result<()> {
    let mut rng = stream(11, "gradient-demo", &[]);
    let arch = Architecture {
        layers: 2,
        hidden: 3,
        classes: 2,
        tables: vec![TableSpec::new("nodes", 6)],
        dropout: 0.0,
    };
    let mut model = NodeClassifier::init(arch, &mut rng)?;
    let g = generate_random_graph(6, 0.4, &mut rng)?;
    let groups = NodeGroups::single(g.n());
    let a = deterministic_assignment(Strategy::Static, &g, &groups)?;
    let classes: Vec<usize> = (0..g.n()).map(|_| rng.random_range(0..2)).collect();
    let target = PredictionMatrix::one_hot(&classes, 2)?;

    let (pred, cache) = forward_cached(&model, &g, &groups, &a)?;
    let loss = kl_node_loss(&pred, &target, None)?;
    let grads = backward(&model, &g, &groups, &a, &target, None, &cache)?;
    println!("loss at the checked point: {loss:.6}");

    let h = 1e-5;
    let mut worst = (0.0_f64, String::new());
    let names: Vec<String> = grads.iter().map(|(n, _)| n.to_string()).collect();
    for name in &names {
        let (rows, cols) = {
            let t = grads.get(name);
            (t.nrows(), t.ncols())
        };
        for i in 0..rows {
            for j in 0..cols {
                let orig = model.params().get(name)[(i, j)];
                model.params_mut().get_mut(name)[(i, j)] = orig + h;
                let up = loss_of(&model, &g, &groups, &a, &target)?;
                model.params_mut().get_mut(name)[(i, j)] = orig - h;
                let down = loss_of(&model, &g, &groups, &a, &target)?;
                model.params_mut().get_mut(name)[(i, j)] = orig;

                let fd = (up - down) / (2.0 * h);
                let an = grads.get(name)[(i, j)];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-8);
                if rel > worst.0 {
                    worst = (rel, format!("{name}[{i},{j}] analytic={an:.3e} fd={fd:.3e}"));
                }
            }
        }
    }
    println!("checked every entry of: {}", names.join(", "));
    println!("worst relative error: {:.3e}  ({})", worst.0, worst.1);
    assert!(worst.0 < 1e-4, "finite differences disagree with backward");
    println!("backward pass agrees with finite differences");
    Ok(())
}
