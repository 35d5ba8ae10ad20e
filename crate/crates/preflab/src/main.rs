//! Thin command-line front end over the experiment harness: every
//! subcommand resolves a [`RunConfig`] (defaults ← `--config` file ← flags)
//! and delegates to the corresponding `harness` function.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use preflab::harness::{
    cmd_equivariance, cmd_evaluate, cmd_generate, cmd_predict, cmd_sweep, cmd_train, RunConfig,
    Task,
};
use preflab::infer::InferenceMode;
use preflab::labeling::Strategy;
use preflab::Result;

#[derive(Parser)]
#[command(
    name = "preflab",
    about = "Node classification on unattributed graphs via sampled labelings",
    version
)]
struct Cli {
    /// Read the run configuration from a TOML file; flags override fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cap the number of worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured dataset.
    Generate(Overrides),
    /// Train a model on the configured dataset and write the checkpoint.
    Train(Overrides),
    /// Classify the nodes of one graph (edge list) or formula (DIMACS).
    Predict {
        #[command(flatten)]
        overrides: Overrides,
        /// Input file: edge list for the graph task, DIMACS for the
        /// formula task.
        #[arg(long)]
        input: PathBuf,
        /// Try every labeling instead of sampling m of them.
        #[arg(long)]
        exhaustive: bool,
        /// Write the per-node CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the configured checkpoint on the configured dataset.
    Evaluate(Overrides),
    /// Measure the metric across labeling counts (inference m; training K).
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        /// Inference labeling counts, e.g. --m-values 1,2,5,10.
        #[arg(long, value_delimiter = ',', required = true)]
        m_values: Vec<usize>,
        /// Training labeling counts; each K trains a fresh model.
        #[arg(long, value_delimiter = ',')]
        k_values: Vec<usize>,
    },
    /// Audit generalized equivariance exhaustively on small random graphs.
    Equivariance {
        #[command(flatten)]
        overrides: Overrides,
        /// Number of 4–6-node graphs to audit.
        #[arg(long, default_value_t = 10)]
        graphs: usize,
    },
}

/// Flag mirror of the `RunConfig` fields; unset flags keep the config-file
/// or default value.
#[derive(Args)]
struct Overrides {
    /// Benchmark task: mis | sat.
    #[arg(long)]
    task: Option<Task>,
    /// Labeling strategy: same | static | random | degree_feature |
    /// degree_rank | preferential.
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Candidate labelings per sample per training epoch.
    #[arg(long)]
    k: Option<usize>,
    /// Labelings sampled at inference.
    #[arg(long)]
    m: Option<usize>,
    /// Inference mode: plain | averaging | preferential.
    #[arg(long)]
    mode: Option<InferenceMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Dataset size (graphs or formulas).
    #[arg(long)]
    count: Option<usize>,
    /// Smallest instance size (nodes or variables).
    #[arg(long)]
    size_lo: Option<usize>,
    /// Largest instance size (nodes or variables).
    #[arg(long)]
    size_hi: Option<usize>,
    #[arg(long)]
    edge_prob: Option<f64>,
    #[arg(long)]
    clause_ratio: Option<f64>,
    /// Join each literal with its negation in formula graphs.
    #[arg(long)]
    complement_edges: Option<bool>,
    /// Dataset file (graph task) or directory (formula task).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    metrics: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self, config_file: Option<&PathBuf>) -> Result<RunConfig> {
        let mut cfg = match config_file {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::desk_defaults(self.task.unwrap_or(Task::Mis)),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$field = v; })*
            };
        }
        apply!(
            task, strategy, k, m, seed, layers, hidden, dropout, epochs, learning_rate,
            batch_size, count, size_lo, size_hi, edge_prob, clause_ratio, complement_edges,
            dataset, checkpoint, metrics
        );
        if let Some(mode) = self.mode {
            cfg.inference_mode = mode;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(ov) => {
            let cfg = ov.resolve(cli.config.as_ref())?;
            println!("{}", cmd_generate(&cfg)?);
        }
        Command::Train(ov) => {
            let cfg = ov.resolve(cli.config.as_ref())?;
            let report = cmd_train(&cfg)?;
            if let Some(loss) = report.final_mean_loss() {
                println!("final mean loss {loss:.6} after {} epochs", report.epochs.len());
            }
            println!("checkpoint written to {}", cfg.checkpoint.display());
        }
        Command::Predict {
            overrides,
            input,
            exhaustive,
            out,
        } => {
            let cfg = overrides.resolve(cli.config.as_ref())?;
            let csv = cmd_predict(&cfg, &input, exhaustive)?;
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Evaluate(ov) => {
            let cfg = ov.resolve(cli.config.as_ref())?;
            let outcome = cmd_evaluate(&cfg)?;
            println!("{} = {}", outcome.metric_name, outcome.value);
            println!("metrics written to {}", cfg.metrics.display());
        }
        Command::Sweep {
            overrides,
            m_values,
            k_values,
        } => {
            let cfg = overrides.resolve(cli.config.as_ref())?;
            let csv = cmd_sweep(&cfg, &m_values, &k_values)?;
            print!("{csv}");
            println!("metrics written to {}", cfg.metrics.display());
        }
        Command::Equivariance { overrides, graphs } => {
            let cfg = overrides.resolve(cli.config.as_ref())?;
            let audit = cmd_equivariance(&cfg, graphs)?;
            print!("{}", audit.to_text());
            if !audit.all_hold() {
                return Err(preflab::Error::invalid(
                    "equivariance audit",
                    format!("{} failures", audit.total_failures()),
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure {threads} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
