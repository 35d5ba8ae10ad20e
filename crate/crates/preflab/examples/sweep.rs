//! How many sampled labelings are enough? Sweep the inference count m on a
//! trained model, then the training count K (one fresh model each),
//! printing the metric table the paper-style plots are drawn from.

use preflab::harness::{cmd_generate, cmd_sweep, cmd_train, RunConfig, Task};

fn main() -> preflab::Result<()> {
    let dir = std::env::temp_dir().join("preflab-sweep-example");

    let mut cfg = RunConfig::desk_defaults(Task::Mis);
    cfg.count = 250;
    cfg.size_lo = 8;
    cfg.size_hi = 12;
    cfg.epochs = 8;
    cfg.k = 5;
    cfg.dataset = dir.join("data.txt");
    cfg.checkpoint = dir.join("model.txt");
    cfg.metrics = dir.join("m-sweep.csv");

    println!("{}", cmd_generate(&cfg)?);
    cmd_train(&cfg)?;

    // Inference-side: same checkpoint, growing m.
    println!("\naccuracy vs inference labelings (strategy,k,m,metric):");
    print!("{}", cmd_sweep(&cfg, &[1, 2, 5, 10], &[])?);

    // Training-side: a fresh model per K, evaluated at m = 5.
    cfg.metrics = dir.join("k-sweep.csv");
    println!("\naccuracy vs training labelings (strategy,k,m,metric):");
    print!("{}", cmd_sweep(&cfg, &[5], &[1, 2, 5])?);

    println!("\ntables written to {}", dir.display());
    Ok(())
}
