//! SAT certificate-prediction benchmark: CNF formulas with DIMACS I/O, a
//! DPLL oracle for ground-truth certificates, the bipartite literal–clause
//! graph encoding, per-variable decoding of model outputs, and the
//! formula-level error-rate metric.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, PredictionMatrix};
use crate::infer::{predict_with_mode, InferenceMode, Prediction};
use crate::labeling::{NodeGroups, Strategy};
use crate::nn::NodeClassifier;
use crate::seed::stream;
use crate::train::TrainSample;

/// DPLL is budgeted to formulas of at most this many variables.
pub const SAT_ORACLE_LIMIT: usize = 64;

/// A CNF formula: clauses of nonzero 1-indexed signed literals.
/// Construction normalizes each clause (duplicate literals dropped, keeping
/// first occurrence) and drops tautological clauses (v together with −v),
/// which never changes satisfiability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Vec<i32>>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Vec<i32>>) -> Result<CnfFormula> {
        if num_vars == 0 {
            return Err(Error::invalid("formula", "must have at least one variable"));
        }
        let mut normalized = Vec::with_capacity(clauses.len());
        for (ci, clause) in clauses.into_iter().enumerate() {
            let mut seen: Vec<i32> = Vec::with_capacity(clause.len());
            let mut tautology = false;
            for lit in clause {
                if lit == 0 || lit.unsigned_abs() as usize > num_vars {
                    return Err(Error::invalid(
                        "formula",
                        format!("clause {ci} has literal {lit} outside ±[1, {num_vars}]"),
                    ));
                }
                if seen.contains(&-lit) {
                    tautology = true;
                }
                if !seen.contains(&lit) {
                    seen.push(lit);
                }
            }
            if !tautology {
                normalized.push(seen);
            }
        }
        Ok(CnfFormula {
            num_vars,
            clauses: normalized,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<i32>] {
        &self.clauses
    }
}

/// A truth assignment, index v−1 holding variable v.
pub type Certificate = Vec<bool>;

/// True iff every clause contains at least one satisfied literal. An empty
/// clause is never satisfied; a formula with no clauses always is.
pub fn verify_certificate(f: &CnfFormula, cert: &[bool]) -> Result<bool> {
    if cert.len() != f.num_vars {
        return Err(Error::dim(format!(
            "certificate covers {} variables but formula has {}",
            cert.len(),
            f.num_vars
        )));
    }
    Ok(f.clauses.iter().all(|clause| {
        clause
            .iter()
            .any(|&lit| cert[lit.unsigned_abs() as usize - 1] == (lit > 0))
    }))
}

/// Parse DIMACS CNF: optional `c` comment lines, a `p cnf <vars> <clauses>`
/// header, then clauses as 0-terminated literal sequences (clauses may span
/// lines). Errors carry the offending line number.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<i32>> = Vec::new();
    let mut current: Vec<i32> = Vec::new();
    let mut last_line = 0;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("p cnf ") {
            if header.is_some() {
                return Err(Error::parse(lineno, "duplicate 'p cnf' header"));
            }
            let mut parts = rest.split_whitespace();
            let vars: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(lineno, "bad variable count in header"))?;
            let count: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(lineno, "bad clause count in header"))?;
            if parts.next().is_some() {
                return Err(Error::parse(lineno, "trailing tokens after header"));
            }
            header = Some((vars, count));
            continue;
        }
        let Some((vars, _)) = header else {
            return Err(Error::parse(lineno, "clause before 'p cnf' header"));
        };
        for tok in line.split_whitespace() {
            let lit: i32 = tok
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad literal {tok:?}")))?;
            if lit == 0 {
                clauses.push(std::mem::take(&mut current));
            } else {
                if lit.unsigned_abs() as usize > vars {
                    return Err(Error::parse(
                        lineno,
                        format!("literal {lit} exceeds declared {vars} variables"),
                    ));
                }
                current.push(lit);
            }
        }
    }
    let Some((vars, count)) = header else {
        return Err(Error::parse(last_line.max(1), "missing 'p cnf' header"));
    };
    if !current.is_empty() {
        return Err(Error::parse(last_line, "last clause is missing its 0 terminator"));
    }
    if clauses.len() != count {
        return Err(Error::parse(
            last_line,
            format!("header declared {count} clauses but found {}", clauses.len()),
        ));
    }
    CnfFormula::new(vars, clauses)
}

/// Inverse of [`parse_dimacs`]: header then one clause per line, each
/// 0-terminated.
pub fn emit_dimacs(f: &CnfFormula) -> String {
    let mut out = format!("p cnf {} {}\n", f.num_vars, f.clauses.len());
    for clause in &f.clauses {
        for lit in clause {
            out.push_str(&format!("{lit} "));
        }
        out.push_str("0\n");
    }
    out
}

/// What a node of the formula graph stands for. Variables are 0-indexed
/// here (variable v of the formula is `var = v − 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatNodeRole {
    PosLiteral { var: usize },
    NegLiteral { var: usize },
    Clause { index: usize },
}

/// The bipartite encoding of a formula plus its node bookkeeping.
#[derive(Debug, Clone)]
pub struct SatGraph {
    pub graph: Graph,
    /// Literal block first (2·num_vars nodes), clause block second.
    pub groups: NodeGroups,
    pub roles: Vec<SatNodeRole>,
    pub num_vars: usize,
}

/// Encode a formula as a graph: literal x_v at node 2(v−1), ¬x_v at
/// 2(v−1)+1, clause j at 2·num_vars + j; an edge joins each clause to every
/// literal it contains. With `complement_edges` each literal pair is also
/// joined, so a variable's two faces are never disconnected (the strict
/// drawing without them is kept testable via the flag).
pub fn cnf_to_graph(f: &CnfFormula, complement_edges: bool) -> Result<SatGraph> {
    let lit_nodes = 2 * f.num_vars;
    let n = lit_nodes + f.clauses.len();
    let mut edges = Vec::new();
    if complement_edges {
        for v in 0..f.num_vars {
            edges.push((2 * v, 2 * v + 1));
        }
    }
    for (j, clause) in f.clauses.iter().enumerate() {
        let cnode = lit_nodes + j;
        for &lit in clause {
            edges.push((literal_node(lit), cnode));
        }
    }
    let graph = Graph::from_edges(n, &edges)?;
    let groups = if f.clauses.is_empty() {
        NodeGroups::from_sizes(&[lit_nodes])?
    } else {
        NodeGroups::from_sizes(&[lit_nodes, f.clauses.len()])?
    };
    let mut roles = Vec::with_capacity(n);
    for v in 0..f.num_vars {
        roles.push(SatNodeRole::PosLiteral { var: v });
        roles.push(SatNodeRole::NegLiteral { var: v });
    }
    for j in 0..f.clauses.len() {
        roles.push(SatNodeRole::Clause { index: j });
    }
    Ok(SatGraph {
        graph,
        groups,
        roles,
        num_vars: f.num_vars,
    })
}

/// Node index of a signed 1-indexed literal.
pub fn literal_node(lit: i32) -> usize {
    let var = lit.unsigned_abs() as usize - 1;
    2 * var + usize::from(lit < 0)
}

/// DPLL with unit propagation, branching on the lowest unassigned variable
/// with `true` first; variables still free once every clause is satisfied
/// default to `false`. Deterministic, so the returned certificate is a
/// function of the formula alone.
pub fn dpll_solve(f: &CnfFormula) -> Result<Option<Certificate>> {
    if f.num_vars > SAT_ORACLE_LIMIT {
        return Err(Error::BudgetExceeded {
            op: "dpll_solve",
            why: format!("{} variables exceed budget {SAT_ORACLE_LIMIT}", f.num_vars),
        });
    }
    let mut assign: Vec<Option<bool>> = vec![None; f.num_vars];
    if dpll(&f.clauses, &mut assign) {
        Ok(Some(assign.into_iter().map(|a| a.unwrap_or(false)).collect()))
    } else {
        Ok(None)
    }
}

fn dpll(clauses: &[Vec<i32>], assign: &mut Vec<Option<bool>>) -> bool {
    // Unit propagation to fixpoint. Forced values are logically implied, so
    // the fixpoint does not depend on clause scan order.
    loop {
        let mut forced: Option<(usize, bool)> = None;
        let mut all_satisfied = true;
        for clause in clauses {
            let mut satisfied = false;
            let mut unassigned: Option<i32> = None;
            let mut unassigned_count = 0;
            for &lit in clause {
                match assign[lit.unsigned_abs() as usize - 1] {
                    Some(val) if val == (lit > 0) => {
                        satisfied = true;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        unassigned = Some(lit);
                        unassigned_count += 1;
                    }
                }
            }
            if satisfied {
                continue;
            }
            all_satisfied = false;
            match unassigned_count {
                0 => return false, // conflict: clause fully falsified
                1 => {
                    let lit = unassigned.unwrap();
                    forced = Some((lit.unsigned_abs() as usize - 1, lit > 0));
                    break;
                }
                _ => {}
            }
        }
        if all_satisfied {
            return true;
        }
        match forced {
            Some((var, val)) => assign[var] = Some(val),
            None => break,
        }
    }

    let var = assign
        .iter()
        .position(|a| a.is_none())
        .expect("unsatisfied clause implies an unassigned variable");
    for val in [true, false] {
        let mut trail = assign.clone();
        trail[var] = Some(val);
        if dpll(clauses, &mut trail) {
            *assign = trail;
            return true;
        }
    }
    false
}

/// One labeled benchmark entry: a satisfiable formula and a verifying
/// assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatInstance {
    pub formula: CnfFormula,
    pub certificate: Certificate,
}

impl SatInstance {
    pub fn new(formula: CnfFormula, certificate: Certificate) -> Result<SatInstance> {
        if !verify_certificate(&formula, &certificate)? {
            return Err(Error::invalid("sat instance", "certificate does not satisfy the formula"));
        }
        Ok(SatInstance {
            formula,
            certificate,
        })
    }

    /// Literal nodes carry the certificate (class 1 = true, the negative
    /// literal the complement); clause nodes get a uniform dummy target and
    /// are masked out of the loss.
    pub fn to_train_sample(&self, complement_edges: bool) -> Result<TrainSample> {
        let sg = cnf_to_graph(&self.formula, complement_edges)?;
        let n = sg.graph.n();
        let mut targets = Array2::<f64>::zeros((n, 2));
        let mut mask = vec![false; n];
        for (node, role) in sg.roles.iter().enumerate() {
            match role {
                SatNodeRole::PosLiteral { var } => {
                    targets[(node, usize::from(self.certificate[*var]))] = 1.0;
                    mask[node] = true;
                }
                SatNodeRole::NegLiteral { var } => {
                    targets[(node, usize::from(!self.certificate[*var]))] = 1.0;
                    mask[node] = true;
                }
                SatNodeRole::Clause { .. } => {
                    targets[(node, 0)] = 0.5;
                    targets[(node, 1)] = 0.5;
                }
            }
        }
        TrainSample::new(
            sg.graph,
            sg.groups,
            PredictionMatrix::new(targets)?,
            Some(mask),
        )
    }
}

/// Read the assignment off a prediction in original node order: variable v
/// is true iff the positive-literal node's argmax class is 1. The negative
/// literal's row is deliberately ignored at decode time.
pub fn decode_assignment(pred: &Prediction, num_vars: usize) -> Certificate {
    (0..num_vars).map(|v| pred.hard_labels[2 * v] == 1).collect()
}

/// Aggregate statistics of rejection sampling during dataset generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SatGenStats {
    pub attempts: usize,
    pub accepted: usize,
}

impl SatGenStats {
    pub fn satisfiable_fraction(&self) -> f64 {
        self.accepted as f64 / self.attempts as f64
    }
}

/// Per-instance cap on rejection-sampling attempts; hitting it means the
/// satisfiable rate is below 1% and the parameters need changing.
const MAX_ATTEMPTS_PER_INSTANCE: usize = 100;

/// `count` satisfiable formulas with num_vars uniform in `var_range`
/// (inclusive), `round(clause_ratio × num_vars)` random width-3 clauses
/// (distinct variables, random signs), kept only when DPLL finds a
/// certificate. Instance i depends only on (seed, i).
pub fn generate_sat_dataset(
    count: usize,
    var_range: (usize, usize),
    clause_ratio: f64,
    seed: u64,
) -> Result<(Vec<SatInstance>, SatGenStats)> {
    let (lo, hi) = var_range;
    if lo < 2 || lo > hi {
        return Err(Error::invalid(
            "sat dataset",
            format!("variable range [{lo}, {hi}] must satisfy 2 <= lo <= hi"),
        ));
    }
    if hi > SAT_ORACLE_LIMIT {
        return Err(Error::BudgetExceeded {
            op: "generate_sat_dataset",
            why: format!("max variables {hi} exceeds oracle budget {SAT_ORACLE_LIMIT}"),
        });
    }
    if !(clause_ratio > 0.0 && clause_ratio.is_finite()) {
        return Err(Error::invalid(
            "sat dataset",
            format!("clause ratio {clause_ratio} must be positive"),
        ));
    }
    let results: Vec<Result<(SatInstance, usize)>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "sat-gen", &[i as u64]);
            for attempt in 1..=MAX_ATTEMPTS_PER_INSTANCE {
                let num_vars = rng.random_range(lo..=hi);
                let num_clauses = (clause_ratio * num_vars as f64).round() as usize;
                let width = 3.min(num_vars);
                let mut clauses = Vec::with_capacity(num_clauses);
                for _ in 0..num_clauses {
                    let vars = rand::seq::index::sample(&mut rng, num_vars, width);
                    let clause = vars
                        .iter()
                        .map(|v| {
                            let sign = if rng.random::<bool>() { 1 } else { -1 };
                            sign * (v as i32 + 1)
                        })
                        .collect();
                    clauses.push(clause);
                }
                let formula = CnfFormula::new(num_vars, clauses)?;
                if let Some(cert) = dpll_solve(&formula)? {
                    return Ok((SatInstance::new(formula, cert)?, attempt));
                }
            }
            Err(Error::BudgetExceeded {
                op: "generate_sat_dataset",
                why: format!(
                    "instance {i}: no satisfiable formula in {MAX_ATTEMPTS_PER_INSTANCE} attempts \
                     (satisfiable rate under 1%); lower clause_ratio (currently {clause_ratio})"
                ),
            })
        })
        .collect();

    let mut instances = Vec::with_capacity(count);
    let mut attempts = 0;
    for r in results {
        let (inst, tries) = r?;
        attempts += tries;
        instances.push(inst);
    }
    Ok((
        instances,
        SatGenStats {
            attempts,
            accepted: count,
        },
    ))
}

/// Fraction of formulas whose decoded assignment fails verification.
/// Instance i's inference randomness comes from (seed, i).
pub fn evaluate_sat(
    model: &NodeClassifier,
    strategy: Strategy,
    instances: &[SatInstance],
    mode: InferenceMode,
    m: usize,
    seed: u64,
    complement_edges: bool,
) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let outcomes: Vec<Result<bool>> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let mut rng = stream(seed, "sat-eval", &[i as u64]);
            let sg = cnf_to_graph(&inst.formula, complement_edges)?;
            let pred =
                predict_with_mode(model, &sg.graph, &sg.groups, strategy, mode, m, &mut rng)?;
            let cert = decode_assignment(&pred, inst.formula.num_vars());
            verify_certificate(&inst.formula, &cert)
        })
        .collect();
    let mut errors = 0usize;
    for o in outcomes {
        errors += usize::from(!o?);
    }
    Ok(errors as f64 / instances.len() as f64)
}

/// Write one DIMACS file per instance plus `manifest.txt`
/// (`sat-dataset v1 <count>` then `<file> <bit...>` lines).
pub fn write_sat_dataset(dir: &Path, instances: &[SatInstance]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = format!("sat-dataset v1 {}\n", instances.len());
    for (i, inst) in instances.iter().enumerate() {
        let name = format!("formula_{i:05}.cnf");
        std::fs::write(dir.join(&name), emit_dimacs(&inst.formula))?;
        manifest.push_str(&name);
        for &b in &inst.certificate {
            manifest.push_str(if b { " 1" } else { " 0" });
        }
        manifest.push('\n');
    }
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}

pub fn read_sat_dataset(dir: &Path) -> Result<Vec<SatInstance>> {
    let manifest_path = dir.join("manifest.txt");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::MissingCheckpoint {
        what: format!("dataset manifest ({e})"),
        path: manifest_path.display().to_string(),
    })?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (ln, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty manifest"))?;
    let count: usize = header
        .strip_prefix("sat-dataset v1 ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(ln, "expected 'sat-dataset v1 <count>'"))?;
    let mut instances = Vec::with_capacity(count);
    for _ in 0..count {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "manifest shorter than declared count"))?;
        let mut parts = line.split_whitespace();
        let file = parts
            .next()
            .ok_or_else(|| Error::parse(ln, "missing formula file name"))?;
        let cert: Certificate = parts
            .map(|tok| match tok {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(Error::parse(ln, format!("certificate bit {tok:?} must be 0 or 1"))),
            })
            .collect::<Result<_>>()?;
        let formula = parse_dimacs(&std::fs::read_to_string(dir.join(file))?)
            .map_err(|e| e.in_stage("sat dataset read"))?;
        instances.push(SatInstance::new(formula, cert)?);
    }
    Ok(instances)
}
