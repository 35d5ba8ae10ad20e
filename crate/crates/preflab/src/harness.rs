//! Experiment orchestration shared by the command-line binary and the
//! runnable examples: a TOML-round-trippable run configuration,
//! stage-seeded generate/train/predict/evaluate pipelines, labeling-count
//! sweeps, and an exhaustive equivariance audit on a small-graph corpus.
//!
//! One global seed fans out into per-stage seeds (hashed from the stage
//! name), so any stage can be re-run on its own and still reproduce the
//! full pipeline bit for bit. Every command writes the resolved
//! configuration next to its primary artifact.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::graph::{generate_random_graph, read_edge_list, Graph};
use crate::infer::{
    exhaustive_equivariance_report, exhaustive_predict, predict_with_mode, InferenceMode,
    Prediction,
};
use crate::labeling::{NodeGroups, Strategy};
use crate::mis::{evaluate_mis, generate_mis_dataset, read_mis_dataset, write_mis_dataset, MisInstance};
use crate::nn::{Architecture, NodeClassifier, TableSpec};
use crate::sat::{
    cnf_to_graph, evaluate_sat, generate_sat_dataset, parse_dimacs, read_sat_dataset,
    write_sat_dataset, SatInstance,
};
use crate::seed::{derive_seed, stream};
use crate::train::{train, TrainConfig, TrainReport, TrainSample};

/// Which benchmark a run targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Mis,
    Sat,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Mis, Task::Sat];

    pub fn key(self) -> &'static str {
        match self {
            Task::Mis => "mis",
            Task::Sat => "sat",
        }
    }

    /// Name of the figure of merit this task reports.
    pub fn metric_name(self) -> &'static str {
        match self {
            Task::Mis => "accuracy",
            Task::Sat => "error_rate",
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Task> {
        Task::ALL
            .into_iter()
            .find(|t| t.key() == s)
            .ok_or_else(|| Error::invalid("task", format!("unknown task {s:?}, expected mis|sat")))
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

fn to_key<T: fmt::Display, S: Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn from_key<'de, T, D>(d: D) -> std::result::Result<T, D::Error>
where
    T: FromStr,
    T::Err: fmt::Display,
    D: Deserializer<'de>,
{
    String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
}

/// Every knob of one experiment run. Serializes to TOML and parses back to
/// an identical value, and all artifacts are reproducible from (config,
/// nothing else).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(serialize_with = "to_key", deserialize_with = "from_key")]
    pub task: Task,
    #[serde(serialize_with = "to_key", deserialize_with = "from_key")]
    pub strategy: Strategy,
    /// Candidate labelings per sample per training epoch (only the
    /// preferential strategy uses more than one).
    pub k: usize,
    /// Labelings tried at inference by the sampling modes.
    pub m: usize,
    #[serde(serialize_with = "to_key", deserialize_with = "from_key")]
    pub inference_mode: InferenceMode,
    pub seed: u64,
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Dataset size (graphs or formulas).
    pub count: usize,
    /// Instance size range, inclusive: node count for graphs, variable
    /// count for formulas.
    pub size_lo: usize,
    pub size_hi: usize,
    /// Edge probability of generated graphs (graph task only).
    pub edge_prob: f64,
    /// Clauses per variable in generated formulas (formula task only).
    pub clause_ratio: f64,
    /// Join each literal with its negation in the formula graph.
    pub complement_edges: bool,
    /// Dataset file (graph task) or directory (formula task).
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
}

impl RunConfig {
    /// Defaults sized for a single workstation: 2,000 instances, a 4-layer
    /// width-32 model, 20 epochs.
    pub fn desk_defaults(task: Task) -> RunConfig {
        let (size_lo, size_hi) = match task {
            Task::Mis => (10, 16),
            Task::Sat => (4, 8),
        };
        // Per-task optimizer settings come from a small grid search at this
        // scale; SAT prefers a hotter, undamped run, MIS a gentler one.
        let (learning_rate, dropout) = match task {
            Task::Mis => (1e-3, 0.1),
            Task::Sat => (2e-3, 0.0),
        };
        RunConfig {
            task,
            strategy: Strategy::Preferential,
            k: 10,
            m: 10,
            inference_mode: InferenceMode::Preferential,
            seed: 1,
            layers: 4,
            hidden: 32,
            dropout,
            epochs: 20,
            learning_rate,
            batch_size: 32,
            count: 2000,
            size_lo,
            size_hi,
            edge_prob: 0.25,
            clause_ratio: 4.0,
            complement_edges: true,
            dataset: match task {
                Task::Mis => PathBuf::from("data/mis-train.txt"),
                Task::Sat => PathBuf::from("data/sat-train"),
            },
            checkpoint: PathBuf::from(format!("out/{}-model.txt", task.key())),
            metrics: PathBuf::from(format!("out/{}-metrics.csv", task.key())),
        }
    }

    /// The model shape this config trains: one embedding table per node
    /// group, sized for the largest instance the generator can emit.
    pub fn architecture(&self) -> Architecture {
        let tables = match self.task {
            Task::Mis => vec![TableSpec::new("nodes", self.size_hi)],
            Task::Sat => {
                let max_clauses = (self.clause_ratio * self.size_hi as f64).round() as usize;
                vec![
                    TableSpec::new("literals", 2 * self.size_hi),
                    TableSpec::new("clauses", max_clauses.max(1)),
                ]
            }
        };
        Architecture {
            layers: self.layers,
            hidden: self.hidden,
            classes: 2,
            tables,
            dropout: self.dropout,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid("config", e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        RunConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Write the resolved config beside `artifact` (as
    /// `<artifact>.config.toml`) so the artifact documents its own recipe.
    pub fn emit_resolved(&self, artifact: &Path) -> Result<PathBuf> {
        let path = config_sibling(artifact);
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, self.to_toml()?)?;
        Ok(path)
    }
}

/// `<artifact>.config.toml`, next to the artifact itself.
pub fn config_sibling(artifact: &Path) -> PathBuf {
    let mut os = artifact.as_os_str().to_owned();
    os.push(".config.toml");
    PathBuf::from(os)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(())
}

/// In-memory dataset of either task.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Mis(Vec<MisInstance>),
    Sat(Vec<SatInstance>),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Mis(v) => v.len(),
            Dataset::Sat(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn train_samples(&self, complement_edges: bool) -> Result<Vec<TrainSample>> {
        match self {
            Dataset::Mis(v) => Ok(v.iter().map(|i| i.to_train_sample()).collect()),
            Dataset::Sat(v) => v.iter().map(|i| i.to_train_sample(complement_edges)).collect(),
        }
    }
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    match cfg.task {
        Task::Mis => {
            let text = std::fs::read_to_string(&cfg.dataset).map_err(|e| Error::MissingCheckpoint {
                what: format!("dataset ({e})"),
                path: cfg.dataset.display().to_string(),
            })?;
            Ok(Dataset::Mis(read_mis_dataset(&text)?))
        }
        Task::Sat => Ok(Dataset::Sat(read_sat_dataset(&cfg.dataset)?)),
    }
}

/// Generate the configured dataset, write it to `cfg.dataset`, and return a
/// one-line summary.
pub fn cmd_generate(cfg: &RunConfig) -> Result<String> {
    generate_impl(cfg).map_err(|e| e.in_stage("generate"))
}

fn generate_impl(cfg: &RunConfig) -> Result<String> {
    let seed = derive_seed(cfg.seed, "generate", &[]);
    let summary = match cfg.task {
        Task::Mis => {
            let data = generate_mis_dataset(cfg.count, (cfg.size_lo, cfg.size_hi), cfg.edge_prob, seed)?;
            ensure_parent(&cfg.dataset)?;
            std::fs::write(&cfg.dataset, write_mis_dataset(&data))?;
            format!(
                "wrote {} graphs (n in [{}, {}], p = {}) to {}",
                data.len(),
                cfg.size_lo,
                cfg.size_hi,
                cfg.edge_prob,
                cfg.dataset.display()
            )
        }
        Task::Sat => {
            let (data, stats) =
                generate_sat_dataset(cfg.count, (cfg.size_lo, cfg.size_hi), cfg.clause_ratio, seed)?;
            write_sat_dataset(&cfg.dataset, &data)?;
            format!(
                "wrote {} formulas (vars in [{}, {}], ratio = {}) to {}; satisfiable fraction of raw draws = {:.3}",
                data.len(),
                cfg.size_lo,
                cfg.size_hi,
                cfg.clause_ratio,
                cfg.dataset.display(),
                stats.satisfiable_fraction()
            )
        }
    };
    cfg.emit_resolved(&cfg.dataset)?;
    Ok(summary)
}

/// Train on the configured dataset and write the checkpoint, its training
/// curve (`<checkpoint>.train.csv`), and the resolved config.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainReport> {
    train_impl(cfg).map_err(|e| e.in_stage("train"))
}

fn train_impl(cfg: &RunConfig) -> Result<TrainReport> {
    let samples = load_dataset(cfg)?.train_samples(cfg.complement_edges)?;
    let mut init_rng = stream(cfg.seed, "init", &[]);
    let model = NodeClassifier::init(cfg.architecture(), &mut init_rng)?;
    let tc = TrainConfig {
        // Only the preferential strategy selects among candidates; every
        // baseline is single-candidate by construction.
        k: if cfg.strategy == Strategy::Preferential { cfg.k } else { 1 },
        epochs: cfg.epochs,
        lr: cfg.learning_rate,
        batch_size: cfg.batch_size,
        seed: derive_seed(cfg.seed, "train", &[]),
        strategy: cfg.strategy,
    };
    let (model, mut report) = train(model, &samples, &tc)?;
    let meta = vec![
        ("task".to_string(), cfg.task.key().to_string()),
        ("strategy".to_string(), cfg.strategy.key().to_string()),
        ("k".to_string(), tc.k.to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("epochs".to_string(), cfg.epochs.to_string()),
    ];
    ensure_parent(&cfg.checkpoint)?;
    Checkpoint::of_model(&model, meta).save(&cfg.checkpoint)?;
    report.checkpoint = Some(cfg.checkpoint.display().to_string());
    let curve = {
        let mut os = cfg.checkpoint.as_os_str().to_owned();
        os.push(".train.csv");
        PathBuf::from(os)
    };
    std::fs::write(curve, report.to_csv())?;
    cfg.emit_resolved(&cfg.checkpoint)?;
    Ok(report)
}

/// Run inference on one graph or formula file and return a per-node CSV
/// (`node,label,p0,p1,...`). `exhaustive` tries every labeling instead of
/// sampling.
pub fn cmd_predict(cfg: &RunConfig, input: &Path, exhaustive: bool) -> Result<String> {
    predict_impl(cfg, input, exhaustive).map_err(|e| e.in_stage("predict"))
}

fn predict_impl(cfg: &RunConfig, input: &Path, exhaustive: bool) -> Result<String> {
    let model = Checkpoint::load(&cfg.checkpoint)?.into_model()?;
    let text = std::fs::read_to_string(input)?;
    let (graph, groups): (Graph, NodeGroups) = match cfg.task {
        Task::Mis => {
            let g = read_edge_list(&text)?;
            let groups = NodeGroups::single(g.n());
            (g, groups)
        }
        Task::Sat => {
            let sg = cnf_to_graph(&parse_dimacs(&text)?, cfg.complement_edges)?;
            (sg.graph, sg.groups)
        }
    };
    let pred = if exhaustive {
        exhaustive_predict(&model, &graph, &groups)?
    } else {
        let mut rng = stream(cfg.seed, "predict", &[]);
        predict_with_mode(
            &model,
            &graph,
            &groups,
            cfg.strategy,
            cfg.inference_mode,
            cfg.m,
            &mut rng,
        )?
    };
    Ok(prediction_csv(&pred))
}

fn prediction_csv(pred: &Prediction) -> String {
    let classes = pred.matrix.cols();
    let mut out = String::from("node,label");
    for c in 0..classes {
        out.push_str(&format!(",p{c}"));
    }
    out.push('\n');
    for (v, &label) in pred.hard_labels.iter().enumerate() {
        out.push_str(&format!("{v},{label}"));
        for c in 0..classes {
            out.push_str(&format!(",{}", pred.matrix.get(v, c)));
        }
        out.push('\n');
    }
    out
}

/// Result of one evaluation: the task metric plus the CSV written to
/// `cfg.metrics`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub metric_name: &'static str,
    pub value: f64,
    pub csv: String,
}

/// Evaluate the configured checkpoint on the configured dataset; writes
/// `cfg.metrics` (`task,strategy,k,m,metric,value`) and the resolved
/// config.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvalOutcome> {
    evaluate_impl(cfg).map_err(|e| e.in_stage("evaluate"))
}

fn evaluate_impl(cfg: &RunConfig) -> Result<EvalOutcome> {
    let model = Checkpoint::load(&cfg.checkpoint)?.into_model()?;
    let data = load_dataset(cfg)?;
    let seed = derive_seed(cfg.seed, "evaluate", &[]);
    let value = eval_metric(&model, &data, cfg, cfg.m, seed)?;
    let metric_name = cfg.task.metric_name();
    let csv = format!(
        "task,strategy,k,m,metric,value\n{},{},{},{},{metric_name},{value}\n",
        cfg.task.key(),
        cfg.strategy.key(),
        cfg.k,
        cfg.m,
    );
    ensure_parent(&cfg.metrics)?;
    std::fs::write(&cfg.metrics, &csv)?;
    cfg.emit_resolved(&cfg.metrics)?;
    Ok(EvalOutcome {
        metric_name,
        value,
        csv,
    })
}

fn eval_metric(
    model: &NodeClassifier,
    data: &Dataset,
    cfg: &RunConfig,
    m: usize,
    seed: u64,
) -> Result<f64> {
    match data {
        Dataset::Mis(v) => evaluate_mis(model, cfg.strategy, v, cfg.inference_mode, m, seed),
        Dataset::Sat(v) => evaluate_sat(
            model,
            cfg.strategy,
            v,
            cfg.inference_mode,
            m,
            seed,
            cfg.complement_edges,
        ),
    }
}

/// Measure the metric across inference labeling counts `m_values`, and —
/// when `k_values` is nonempty — across training labeling counts too,
/// training one model per K on the configured dataset. With `k_values`
/// empty the existing checkpoint is evaluated as-is. Returns the CSV
/// (`strategy,k,m,metric`), also written to `cfg.metrics`.
pub fn cmd_sweep(cfg: &RunConfig, m_values: &[usize], k_values: &[usize]) -> Result<String> {
    sweep_impl(cfg, m_values, k_values).map_err(|e| e.in_stage("sweep"))
}

fn sweep_impl(cfg: &RunConfig, m_values: &[usize], k_values: &[usize]) -> Result<String> {
    if m_values.is_empty() {
        return Err(Error::invalid("sweep", "need at least one m value"));
    }
    let data = load_dataset(cfg)?;
    let mut csv = String::from("strategy,k,m,metric\n");
    let emit_rows = |model: &NodeClassifier, k: usize, csv: &mut String| -> Result<()> {
        for &m in m_values {
            let seed = derive_seed(cfg.seed, "sweep-eval", &[k as u64, m as u64]);
            let value = eval_metric(model, &data, cfg, m, seed)?;
            csv.push_str(&format!("{},{k},{m},{value}\n", cfg.strategy.key()));
        }
        Ok(())
    };
    if k_values.is_empty() {
        let model = Checkpoint::load(&cfg.checkpoint)?.into_model()?;
        emit_rows(&model, cfg.k, &mut csv)?;
    } else {
        let samples = data.train_samples(cfg.complement_edges)?;
        for &k in k_values {
            // Same init across K so the sweep isolates the selection count.
            let mut init_rng = stream(cfg.seed, "init", &[]);
            let model = NodeClassifier::init(cfg.architecture(), &mut init_rng)?;
            let tc = TrainConfig {
                k,
                epochs: cfg.epochs,
                lr: cfg.learning_rate,
                batch_size: cfg.batch_size,
                seed: derive_seed(cfg.seed, "sweep-train", &[k as u64]),
                strategy: cfg.strategy,
            };
            let (model, _) = train(model, &samples, &tc)?;
            emit_rows(&model, k, &mut csv)?;
        }
    }
    ensure_parent(&cfg.metrics)?;
    std::fs::write(&cfg.metrics, &csv)?;
    cfg.emit_resolved(&cfg.metrics)?;
    Ok(csv)
}

/// Per-graph outcome of the equivariance audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRow {
    pub graph_index: usize,
    pub n: usize,
    /// Input permutations checked (all n! of them).
    pub checked: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivarianceAudit {
    pub rows: Vec<AuditRow>,
    /// Where the audited weights came from (checkpoint path or "fresh").
    pub model_source: String,
}

impl EquivarianceAudit {
    pub fn total_checked(&self) -> usize {
        self.rows.iter().map(|r| r.checked).sum()
    }

    pub fn total_failures(&self) -> usize {
        self.rows.iter().map(|r| r.failures).sum()
    }

    pub fn all_hold(&self) -> bool {
        self.total_failures() == 0
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("equivariance audit of {} model\n", self.model_source);
        for r in &self.rows {
            out.push_str(&format!(
                "graph {:3}  n = {}  permutations = {:3}  failures = {}\n",
                r.graph_index, r.n, r.checked, r.failures
            ));
        }
        out.push_str(&format!(
            "total: {} permutations over {} graphs, {} failures\n",
            self.total_checked(),
            self.rows.len(),
            self.total_failures()
        ));
        out
    }
}

/// Check, for `graphs` random graphs with 4–6 nodes, that relabeling the
/// input only relabels the prediction (up to a graph automorphism), under
/// every possible input permutation. Audits `cfg.checkpoint` when it exists
/// and is a single-table model; otherwise audits a freshly initialized
/// model — the property is independent of the weights.
pub fn cmd_equivariance(cfg: &RunConfig, graphs: usize) -> Result<EquivarianceAudit> {
    equivariance_impl(cfg, graphs).map_err(|e| e.in_stage("equivariance"))
}

fn equivariance_impl(cfg: &RunConfig, graphs: usize) -> Result<EquivarianceAudit> {
    if graphs == 0 {
        return Err(Error::invalid("equivariance audit", "need at least one graph"));
    }
    let (model, model_source) = if cfg.checkpoint.is_file() {
        let model = Checkpoint::load(&cfg.checkpoint)?.into_model()?;
        if model.arch().tables.len() != 1 || model.arch().tables[0].rows < 6 {
            return Err(Error::invalid(
                "equivariance audit",
                "checkpoint must hold a single embedding table with at least 6 rows \
                 (the audit runs single-group graphs of up to 6 nodes)",
            ));
        }
        (model, cfg.checkpoint.display().to_string())
    } else {
        let arch = Architecture {
            layers: cfg.layers,
            hidden: cfg.hidden,
            classes: 2,
            tables: vec![TableSpec::new("nodes", 6)],
            dropout: 0.0,
        };
        let mut rng = stream(cfg.seed, "equivariance-init", &[]);
        (NodeClassifier::init(arch, &mut rng)?, "freshly initialized".to_string())
    };
    let rows = (0..graphs)
        .map(|i| {
            let mut rng = stream(cfg.seed, "equivariance", &[i as u64]);
            let n = rng.random_range(4..=6);
            let g = generate_random_graph(n, 0.35, &mut rng)?;
            let report = exhaustive_equivariance_report(&model, &g)?;
            Ok(AuditRow {
                graph_index: i,
                n,
                checked: report.checked,
                failures: report.failures.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquivarianceAudit { rows, model_source })
}

/// generate → train → evaluate in one call, aborting with the failing
/// stage's name.
pub fn run_end_to_end(cfg: &RunConfig) -> Result<EvalOutcome> {
    cmd_generate(cfg)?;
    cmd_train(cfg)?;
    cmd_evaluate(cfg)
}
