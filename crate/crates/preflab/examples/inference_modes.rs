//! One trained model, four ways to read it out: the written-down labeling,
//! an average over sampled labelings, the best of m sampled labelings, and
//! the best over every labeling. Sampling more labelings climbs toward the
//! exhaustive score.

use preflab::graph::PredictionMatrix;
use preflab::infer::{
    averaging_predict, exhaustive_predict_scored, plain_predict, preferential_predict_scored,
};
use preflab::labeling::{NodeGroups, Strategy};
use preflab::mis::generate_mis_dataset;
use preflab::nn::{Architecture, NodeClassifier, TableSpec};
use preflab::seed::stream;
use preflab::train::{train, TrainConfig};

/// Joint log-confidence of a prediction: sum over nodes of ln(max class
/// probability). Invariant under row relabeling, so aligned outputs are
/// directly comparable.
fn confidence(m: &PredictionMatrix) -> f64 {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j)).fold(f64::MIN, f64::max).ln())
        .sum()
}

fn main() -> preflab::Result<()> {
    // A quick model: 80 small MIS instances, a few epochs.
    let data = generate_mis_dataset(80, (5, 7), 0.3, 41)?;
    let samples: Vec<_> = data.iter().map(|i| i.to_train_sample()).collect();
    let arch = Architecture {
        layers: 3,
        hidden: 16,
        classes: 2,
        tables: vec![TableSpec::new("nodes", 7)],
        dropout: 0.0,
    };
    let model = NodeClassifier::init(arch, &mut stream(41, "init", &[]))?;
    let cfg = TrainConfig {
        k: 4,
        epochs: 8,
        lr: 2e-3,
        batch_size: 16,
        seed: 41,
        strategy: Strategy::Preferential,
    };
    let (model, report) = train(model, &samples, &cfg)?;
    println!(
        "trained: mean loss {:.4} -> {:.4}",
        report.epochs.first().unwrap().mean_loss,
        report.epochs.last().unwrap().mean_loss
    );

    let g = &data[0].graph;
    let groups = NodeGroups::single(g.n());
    println!("\nquery graph: {} nodes, optimal independent set {}", g.n(), data[0].optimal_size);

    let plain = plain_predict(&model, g, &groups, Strategy::Preferential)?;
    println!("plain (as-written labeling)   confidence {:+.4}  labels {:?}", confidence(&plain.matrix), plain.hard_labels);

    let avg = averaging_predict(&model, g, &groups, 8, &mut stream(41, "avg", &[]))?;
    println!("averaging over 8 labelings    confidence {:+.4}  labels {:?}", confidence(&avg.matrix), avg.hard_labels);

    for m in [1, 4, 16] {
        let (pred, best) =
            preferential_predict_scored(&model, g, &groups, m, &mut stream(41, "pref", &[m as u64]))?;
        println!(
            "best of m = {m:2} labelings      score {:+.4}  labels {:?}",
            best.score, pred.hard_labels
        );
    }

    let (pred, best) = exhaustive_predict_scored(&model, g, &groups)?;
    println!(
        "exhaustive ({} labelings)  score {:+.4}  labels {:?}",
        (1..=g.n()).product::<usize>(),
        best.score,
        pred.hard_labels
    );
    println!("most confident labeling: {}", best.perm);
    Ok(())
}
