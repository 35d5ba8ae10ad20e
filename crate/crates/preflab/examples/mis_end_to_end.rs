//! Generate → train → evaluate on the independent-set benchmark, twice:
//! once selecting the best of several labelings, once with a single fixed
//! embedding. A scaled-down version of the full experiment (the acceptance
//! suite runs the real one); accuracy counts graphs whose greedily decoded
//! set reaches the optimal size.

use preflab::harness::{run_end_to_end, RunConfig, Task};
use preflab::infer::InferenceMode;
use preflab::labeling::Strategy;

fn main() -> preflab::Result<()> {
    let dir = std::env::temp_dir().join("preflab-mis-example");

    let mut base = RunConfig::desk_defaults(Task::Mis);
    base.count = 300;
    base.size_lo = 8;
    base.size_hi = 12;
    base.epochs = 10;
    base.k = 5;
    base.m = 5;

    let mut results = Vec::new();
    for strategy in [Strategy::Preferential, Strategy::Same] {
        let mut cfg = base.clone();
        cfg.strategy = strategy;
        if !strategy.is_randomized() {
            // A fixed embedding has nothing to sample over at inference.
            cfg.inference_mode = InferenceMode::Plain;
            cfg.m = 1;
        }
        cfg.dataset = dir.join(format!("{}-data.txt", strategy.key()));
        cfg.checkpoint = dir.join(format!("{}-model.txt", strategy.key()));
        cfg.metrics = dir.join(format!("{}-metrics.csv", strategy.key()));
        println!("running {} ...", strategy.key());
        let out = run_end_to_end(&cfg)?;
        println!("  {} = {:.4}  (artifacts in {})", out.metric_name, out.value, dir.display());
        results.push((strategy, out.value));
    }

    println!();
    for (strategy, acc) in &results {
        println!("{:14} accuracy {:.4}", strategy.key(), acc);
    }
    Ok(())
}
