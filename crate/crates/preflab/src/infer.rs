//! Inference over labelings: score candidate node labelings by the model's
//! joint confidence, keep the best one, and map its prediction back to the
//! original node order. Also the averaging ensemble over labelings and the
//! mechanical generalized-equivariance checker (exhaustive inference +
//! deterministic tie-breaking make the guarantee testable, not just
//! provable).
//!
//! Dropout is always off here; every operation is read-only on the model.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{
    automorphisms, permute_graph, permute_output, Graph, Permutation, PredictionMatrix,
    EXHAUSTIVE_LIMIT,
};
use crate::labeling::{
    deterministic_assignment, grouped_permutations, sample_grouped_permutation, NodeGroups,
    Strategy,
};
use crate::nn::{forward, NodeClassifier};

/// Exhaustive search refuses to enumerate more labelings than this (8!).
pub const EXHAUSTIVE_LABELING_LIMIT: u128 = 40_320;

/// Elementwise tolerance for the generalized-equivariance comparison.
pub const EQUIVARIANCE_TOL: f64 = 1e-6;

/// One candidate labeling τ with its joint log-confidence
/// s = Σ_i log max_j f_ij(τ(X)).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLabeling {
    pub perm: Permutation,
    pub score: f64,
}

/// A model output aligned to the ORIGINAL node order: row i of `matrix`
/// describes node i of the graph the caller handed in, whatever labeling
/// won internally.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub matrix: PredictionMatrix,
    /// Per-row argmax class, ties toward the lowest class index.
    pub hard_labels: Vec<usize>,
}

impl Prediction {
    pub fn from_matrix(matrix: PredictionMatrix) -> Prediction {
        let hard_labels = (0..matrix.rows()).map(|i| matrix.argmax_row(i)).collect();
        Prediction { matrix, hard_labels }
    }
}

/// Joint log-probability of labeling `tau`: relabel the graph, read the
/// position-induced embeddings, and sum each node's max log-probability.
pub fn score(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    tau: &Permutation,
) -> Result<ScoredLabeling> {
    let (s, _) = eval_labeling(model, g, groups, tau)?;
    Ok(ScoredLabeling {
        perm: tau.clone(),
        score: s,
    })
}

/// Forward on τ(X) plus the labeling's score. The returned matrix is in the
/// PERMUTED order (row i = node i of τ(X)); align with [`align_to_original`].
fn eval_labeling(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    tau: &Permutation,
) -> Result<(f64, PredictionMatrix)> {
    let pg = permute_graph(g, tau)?;
    let a = deterministic_assignment(Strategy::Static, &pg, groups)?;
    let out = forward(model, &pg, groups, &a)?;
    let mut s = 0.0;
    for i in 0..out.rows() {
        s += out.get(i, out.argmax_row(i)).ln();
    }
    if !s.is_finite() {
        return Err(Error::NonFinite {
            stage: "labeling score".to_string(),
        });
    }
    Ok((s, out))
}

/// Undo the relabeling: result row v = permuted-output row τ(v), so row v
/// describes original node v.
fn align_to_original(out: &PredictionMatrix, tau: &Permutation) -> Result<PredictionMatrix> {
    permute_output(out, &tau.inverse())
}

/// Single forward pass with the strategy's own assignment (identity
/// labeling for the randomized strategies): the baseline inference mode.
pub fn plain_predict(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    strategy: Strategy,
) -> Result<Prediction> {
    let effective = if strategy.is_randomized() {
        Strategy::Static
    } else {
        strategy
    };
    let a = deterministic_assignment(effective, g, groups)?;
    Ok(Prediction::from_matrix(forward(model, g, groups, &a)?))
}

/// Ranking used everywhere a winner is chosen: higher score wins; exact
/// score ties go to the lexicographically smallest permutation map.
fn better(candidate: &ScoredLabeling, incumbent: &ScoredLabeling) -> bool {
    candidate.score > incumbent.score
        || (candidate.score == incumbent.score && candidate.perm.map() < incumbent.perm.map())
}

fn select_and_align(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    candidates: &[Permutation],
) -> Result<(Prediction, ScoredLabeling)> {
    let evaluated: Vec<Result<(f64, PredictionMatrix)>> = candidates
        .par_iter()
        .map(|tau| eval_labeling(model, g, groups, tau))
        .collect();
    let mut best: Option<(ScoredLabeling, PredictionMatrix)> = None;
    for (tau, ev) in candidates.iter().zip(evaluated) {
        let (s, out) = ev?;
        let scored = ScoredLabeling {
            perm: tau.clone(),
            score: s,
        };
        if best.as_ref().is_none_or(|(inc, _)| better(&scored, inc)) {
            best = Some((scored, out));
        }
    }
    let (winner, out) = best.expect("at least one candidate");
    let aligned = align_to_original(&out, &winner.perm)?;
    Ok((Prediction::from_matrix(aligned), winner))
}

/// Max-confidence inference over `m` labelings: the identity plus m−1
/// sampled within-group permutations. Returns the winner's prediction in
/// original node order together with the winning labeling.
pub fn preferential_predict_scored<R: Rng>(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    m: usize,
    rng: &mut R,
) -> Result<(Prediction, ScoredLabeling)> {
    if m == 0 {
        return Err(Error::invalid("inference", "labeling count m must be at least 1"));
    }
    let mut candidates = vec![Permutation::identity(g.n())];
    for _ in 1..m {
        candidates.push(sample_grouped_permutation(groups, rng));
    }
    select_and_align(model, g, groups, &candidates)
}

/// [`preferential_predict_scored`] without the winning-labeling detail.
pub fn preferential_predict<R: Rng>(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    m: usize,
    rng: &mut R,
) -> Result<Prediction> {
    Ok(preferential_predict_scored(model, g, groups, m, rng)?.0)
}

/// Max-confidence inference over EVERY within-group labeling, in
/// lexicographic order. This is the mode under which the generalized-
/// equivariance guarantee is exact rather than asymptotic.
pub fn exhaustive_predict_scored(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
) -> Result<(Prediction, ScoredLabeling)> {
    let count = groups
        .permutation_count()
        .filter(|&c| c <= EXHAUSTIVE_LABELING_LIMIT)
        .ok_or(Error::ExhaustiveLimitExceeded {
            n: g.n(),
            limit: EXHAUSTIVE_LIMIT,
        })?;
    debug_assert!(count >= 1);
    let candidates = grouped_permutations(groups);
    select_and_align(model, g, groups, &candidates)
}

pub fn exhaustive_predict(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
) -> Result<Prediction> {
    Ok(exhaustive_predict_scored(model, g, groups)?.0)
}

/// Ensemble inference: average the aligned outputs of `m` labelings
/// (identity plus m−1 samples), renormalizing rows against float drift.
pub fn averaging_predict<R: Rng>(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    m: usize,
    rng: &mut R,
) -> Result<Prediction> {
    if m == 0 {
        return Err(Error::invalid("inference", "labeling count m must be at least 1"));
    }
    let mut candidates = vec![Permutation::identity(g.n())];
    for _ in 1..m {
        candidates.push(sample_grouped_permutation(groups, rng));
    }
    let evaluated: Vec<Result<(f64, PredictionMatrix)>> = candidates
        .par_iter()
        .map(|tau| eval_labeling(model, g, groups, tau))
        .collect();
    let mut sum = ndarray::Array2::<f64>::zeros((g.n(), model.arch().classes));
    for (tau, ev) in candidates.iter().zip(evaluated) {
        let (_, out) = ev?;
        let aligned = align_to_original(&out, tau)?;
        sum += aligned.values();
    }
    sum /= m as f64;
    for mut row in sum.rows_mut() {
        let total: f64 = row.sum();
        row.mapv_inplace(|v| v / total);
    }
    Ok(Prediction::from_matrix(PredictionMatrix::new(sum)?))
}

/// How a trained model turns a graph into a prediction at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InferenceMode {
    /// One forward pass with the strategy's own assignment.
    Plain,
    /// Mean of m aligned labeling outputs.
    Averaging,
    /// Max-score labeling among m candidates.
    Preferential,
}

impl InferenceMode {
    pub const ALL: [InferenceMode; 3] = [
        InferenceMode::Plain,
        InferenceMode::Averaging,
        InferenceMode::Preferential,
    ];

    pub fn key(self) -> &'static str {
        match self {
            InferenceMode::Plain => "plain",
            InferenceMode::Averaging => "averaging",
            InferenceMode::Preferential => "preferential",
        }
    }
}

impl std::str::FromStr for InferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<InferenceMode> {
        InferenceMode::ALL
            .into_iter()
            .find(|m| m.key() == s)
            .ok_or_else(|| {
                Error::invalid(
                    "inference mode",
                    format!("unknown key {s:?}, expected plain|averaging|preferential"),
                )
            })
    }
}

impl std::fmt::Display for InferenceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

/// Dispatch on the inference mode. The labeling-sampling modes only make
/// sense for models whose training assignment is position-induced
/// (random/preferential); the fixed-assignment baselines are evaluated
/// plain, and asking otherwise is an error rather than a silent mismatch.
pub fn predict_with_mode<R: Rng>(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    strategy: Strategy,
    mode: InferenceMode,
    m: usize,
    rng: &mut R,
) -> Result<Prediction> {
    match mode {
        InferenceMode::Plain => plain_predict(model, g, groups, strategy),
        InferenceMode::Averaging | InferenceMode::Preferential => {
            if !strategy.is_randomized() {
                return Err(Error::invalid(
                    "inference mode",
                    format!("{mode} inference requires a randomized strategy, got {strategy}"),
                ));
            }
            match mode {
                InferenceMode::Averaging => averaging_predict(model, g, groups, m, rng),
                _ => preferential_predict(model, g, groups, m, rng),
            }
        }
    }
}

/// Result of one generalized-equivariance check.
#[derive(Debug, Clone)]
pub struct EquivarianceCheck {
    pub holds: bool,
    /// The automorphism γ with Ŷ(π(X)) == (π∘γ)(Ŷ(X)), when one exists.
    pub witness: Option<Permutation>,
}

/// Does relabeling the input only relabel the output? Checks whether some
/// automorphism γ of `g` satisfies Ŷ(π(X)) == (π∘γ)(Ŷ(X)) elementwise
/// within [`EQUIVARIANCE_TOL`], with Ŷ the exhaustive max-confidence
/// prediction. Plain (single-group) graphs only.
pub fn check_generalized_equivariance(
    model: &NodeClassifier,
    g: &Graph,
    pi: &Permutation,
) -> Result<EquivarianceCheck> {
    let groups = NodeGroups::single(g.n());
    let base = exhaustive_predict(model, g, &groups)?;
    let pg = permute_graph(g, pi)?;
    let lhs = exhaustive_predict(model, &pg, &groups)?;
    for gamma in automorphisms(g)? {
        let rhs = permute_output(&base.matrix, &pi.compose(&gamma)?)?;
        if lhs.matrix.max_abs_diff(&rhs) <= EQUIVARIANCE_TOL {
            return Ok(EquivarianceCheck {
                holds: true,
                witness: Some(gamma),
            });
        }
    }
    Ok(EquivarianceCheck {
        holds: false,
        witness: None,
    })
}

/// Outcome of sweeping every π ∈ S_n through the equivariance check.
#[derive(Debug, Clone)]
pub struct EquivarianceReport {
    pub checked: usize,
    /// Permutations π for which no automorphism witness exists.
    pub failures: Vec<Permutation>,
}

impl EquivarianceReport {
    pub fn all_hold(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Check generalized equivariance for ALL n! permutations of `g` at the
/// cost of n! forwards instead of n!·n!: every relabeling τ of every
/// permuted graph π(X) equals (τ∘π)(X), so the n! forward results are
/// shared across all π. Exact same selection rule as
/// [`exhaustive_predict`]; equality of results is covered by tests.
pub fn exhaustive_equivariance_report(
    model: &NodeClassifier,
    g: &Graph,
) -> Result<EquivarianceReport> {
    let n = g.n();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::ExhaustiveLimitExceeded {
            n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let groups = NodeGroups::single(n);
    let perms: Vec<Permutation> = Permutation::all(n).collect();
    let index: HashMap<&[usize], usize> = perms
        .iter()
        .enumerate()
        .map(|(i, p)| (p.map(), i))
        .collect();

    // One forward per σ ∈ S_n, shared by every (π, τ) with τ∘π = σ.
    let evaluated: Vec<Result<(f64, PredictionMatrix)>> = perms
        .par_iter()
        .map(|sigma| eval_labeling(model, g, &groups, sigma))
        .collect();
    let mut scores = Vec::with_capacity(perms.len());
    let mut outputs = Vec::with_capacity(perms.len());
    for ev in evaluated {
        let (s, out) = ev?;
        scores.push(s);
        outputs.push(out);
    }

    // Select the winning labeling of π(X): iterate τ in lex order and look
    // the candidate up at σ = τ∘π. For π = identity this is the base Ŷ(X).
    let select = |pi: &Permutation| -> Result<PredictionMatrix> {
        let mut best: Option<(usize, f64)> = None; // (τ index, score)
        for (ti, tau) in perms.iter().enumerate() {
            let sigma = tau.compose(pi)?;
            let s = scores[index[sigma.map()]];
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((ti, s));
            }
        }
        let (ti, _) = best.expect("S_n is nonempty");
        let sigma = perms[ti].compose(pi)?;
        align_to_original(&outputs[index[sigma.map()]], &perms[ti])
    };

    let base = select(&Permutation::identity(n))?;
    let auts = automorphisms(g)?;
    let candidates: Vec<PredictionMatrix> = auts
        .iter()
        .map(|gamma| permute_output(&base, gamma))
        .collect::<Result<_>>()?;

    let mut failures = Vec::new();
    for pi in &perms {
        let lhs = select(pi)?;
        let holds = candidates.iter().any(|rhs| {
            permute_output(rhs, pi)
                .map(|shifted| lhs.max_abs_diff(&shifted) <= EQUIVARIANCE_TOL)
                .unwrap_or(false)
        });
        if !holds {
            failures.push(pi.clone());
        }
    }
    Ok(EquivarianceReport {
        checked: perms.len(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Architecture, ParamSet, TableSpec};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arch(rows: usize, hidden: usize) -> Architecture {
        Architecture {
            layers: 2,
            hidden,
            classes: 2,
            tables: vec![TableSpec::new("node", rows)],
            dropout: 0.0,
        }
    }

    fn seeded_model(rows: usize, hidden: usize, seed: u64) -> NodeClassifier {
        NodeClassifier::init(arch(rows, hidden), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn tied_model_scores_n_log_half() {
        // All-zero parameters give logits 0 and probabilities 1/2 at every
        // node, so the log-score is n·ln(1/2) for any labeling.
        let a = arch(5, 3);
        let model = NodeClassifier::from_params(a.clone(), ParamSet::zeros(&a)).unwrap();
        let g = Graph::cycle(5);
        let groups = NodeGroups::single(5);
        let s = score(&model, &g, &groups, &Permutation::identity(5)).unwrap();
        assert!((s.score - 5.0 * 0.5_f64.ln()).abs() < 1e-12);
        assert!(s.score <= 0.0);
    }

    #[test]
    fn single_node_score_is_max_log_prob() {
        let model = seeded_model(1, 4, 3);
        let g = Graph::from_edges(1, &[]).unwrap();
        let groups = NodeGroups::single(1);
        let s = score(&model, &g, &groups, &Permutation::identity(1)).unwrap();
        let a = deterministic_assignment(Strategy::Static, &g, &groups).unwrap();
        let out = forward(&model, &g, &groups, &a).unwrap();
        let expect = out.get(0, out.argmax_row(0)).ln();
        assert_eq!(s.score.to_bits(), expect.to_bits());
    }

    #[test]
    fn automorphic_labelings_tie_exactly() {
        // Reversing a path is an automorphism: the relabeled graph is the
        // same adjacency matrix, so the forward pass — and the score — is
        // bitwise identical, distinct embeddings notwithstanding.
        let model = seeded_model(3, 4, 5);
        let g = Graph::path(3);
        let groups = NodeGroups::single(3);
        let id = score(&model, &g, &groups, &Permutation::identity(3)).unwrap();
        let rev = score(&model, &g, &groups, &Permutation::from_map(vec![2, 1, 0]).unwrap())
            .unwrap();
        assert_eq!(id.score.to_bits(), rev.score.to_bits());

        // A non-automorphism generally scores differently (the embeddings
        // sit on different structural positions).
        let swap = score(&model, &g, &groups, &Permutation::from_map(vec![1, 0, 2]).unwrap())
            .unwrap();
        assert_ne!(id.score.to_bits(), swap.score.to_bits());

        // Direct recomputation oracle for the non-trivial labeling.
        let tau = Permutation::from_map(vec![1, 0, 2]).unwrap();
        let pg = permute_graph(&g, &tau).unwrap();
        let a = deterministic_assignment(Strategy::Static, &pg, &groups).unwrap();
        let out = forward(&model, &pg, &groups, &a).unwrap();
        let expect: f64 = (0..3).map(|i| out.get(i, out.argmax_row(i)).ln()).sum();
        assert_eq!(swap.score.to_bits(), expect.to_bits());
    }

    #[test]
    fn m1_preferential_equals_plain_forward() {
        let model = seeded_model(6, 4, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = crate::graph::generate_random_graph(6, 0.5, &mut rng).unwrap();
        let groups = NodeGroups::single(6);
        let pred = preferential_predict(&model, &g, &groups, 1, &mut rng).unwrap();
        let plain = plain_predict(&model, &g, &groups, Strategy::Preferential).unwrap();
        assert_eq!(pred, plain);
    }

    #[test]
    fn m1_averaging_equals_plain_forward() {
        let model = seeded_model(6, 4, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = crate::graph::generate_random_graph(6, 0.5, &mut rng).unwrap();
        let groups = NodeGroups::single(6);
        let avg = averaging_predict(&model, &g, &groups, 1, &mut rng).unwrap();
        let plain = plain_predict(&model, &g, &groups, Strategy::Preferential).unwrap();
        assert!(avg.matrix.max_abs_diff(&plain.matrix) < 1e-12);
    }

    #[test]
    fn exhaustive_selects_true_maximum_on_s4() {
        let model = seeded_model(4, 4, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = crate::graph::generate_random_graph(4, 0.5, &mut rng).unwrap();
        let groups = NodeGroups::single(4);
        let (_, winner) = exhaustive_predict_scored(&model, &g, &groups).unwrap();
        // Independent full enumeration through the public scoring op.
        let mut best = f64::NEG_INFINITY;
        let mut count = 0;
        for p in Permutation::all(4) {
            best = best.max(score(&model, &g, &groups, &p).unwrap().score);
            count += 1;
        }
        assert_eq!(count, 24);
        assert_eq!(winner.score.to_bits(), best.to_bits());
    }

    #[test]
    fn sampled_winner_dominates_every_candidate() {
        let model = seeded_model(6, 4, 13);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let g = crate::graph::generate_random_graph(6, 0.4, &mut rng).unwrap();
        let groups = NodeGroups::single(6);
        // Re-derive the same candidate list the call will draw.
        let mut probe = rng.clone();
        let mut cands = vec![Permutation::identity(6)];
        for _ in 1..5 {
            cands.push(sample_grouped_permutation(&groups, &mut probe));
        }
        let (_, winner) = preferential_predict_scored(&model, &g, &groups, 5, &mut rng).unwrap();
        for c in cands {
            assert!(winner.score >= score(&model, &g, &groups, &c).unwrap().score);
        }
    }

    #[test]
    fn averaging_two_labelings_is_elementwise_mean() {
        let model = seeded_model(5, 4, 15);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let g = crate::graph::generate_random_graph(5, 0.5, &mut rng).unwrap();
        let groups = NodeGroups::single(5);
        let mut probe = rng.clone();
        let tau = sample_grouped_permutation(&groups, &mut probe);
        let avg = averaging_predict(&model, &g, &groups, 2, &mut rng).unwrap();

        let id_out = eval_labeling(&model, &g, &groups, &Permutation::identity(5))
            .unwrap()
            .1;
        let tau_out = eval_labeling(&model, &g, &groups, &tau).unwrap().1;
        let aligned = align_to_original(&tau_out, &tau).unwrap();
        for v in 0..5 {
            for c in 0..2 {
                let mean = (id_out.get(v, c) + aligned.get(v, c)) / 2.0;
                assert!((avg.matrix.get(v, c) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_pi_holds_with_identity_witness() {
        let model = seeded_model(4, 4, 17);
        let g = Graph::path(4);
        let check =
            check_generalized_equivariance(&model, &g, &Permutation::identity(4)).unwrap();
        assert!(check.holds);
        // The path's automorphisms are id and reversal; identity must
        // satisfy the equation and is tried first.
        assert_eq!(check.witness, Some(Permutation::identity(4)));
    }

    #[test]
    fn c4_equivariance_holds_for_rotations() {
        let model = seeded_model(4, 4, 18);
        let g = Graph::cycle(4);
        for map in [vec![1, 2, 3, 0], vec![2, 3, 0, 1], vec![1, 0, 3, 2]] {
            let pi = Permutation::from_map(map).unwrap();
            let check = check_generalized_equivariance(&model, &g, &pi).unwrap();
            assert!(check.holds, "failed for pi = {pi}");
        }
    }

    #[test]
    fn rigid_tree_witness_is_identity() {
        // Path 0-1-2-3-4-5 with a leaf at node 2: branches from the unique
        // degree-3 node have sizes 2, 3, 1, so the automorphism group is
        // trivial and the only possible witness is the identity.
        let g = Graph::from_edges(7, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (2, 6)]).unwrap();
        assert_eq!(automorphisms(&g).unwrap().len(), 1);
        let model = seeded_model(7, 3, 19);
        let pi = Permutation::from_map(vec![3, 0, 5, 6, 2, 1, 4]).unwrap();
        let check = check_generalized_equivariance(&model, &g, &pi).unwrap();
        assert!(check.holds);
        assert_eq!(check.witness, Some(Permutation::identity(7)));
    }

    #[test]
    fn batched_report_matches_direct_checker() {
        let model = seeded_model(4, 4, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = crate::graph::generate_random_graph(4, 0.5, &mut rng).unwrap();
        let report = exhaustive_equivariance_report(&model, &g).unwrap();
        assert_eq!(report.checked, 24);
        // Cross-validate the shared-forward path against the direct op for
        // every π (n is tiny, so the quadratic cost is fine here).
        for pi in Permutation::all(4) {
            let direct = check_generalized_equivariance(&model, &g, &pi).unwrap();
            let in_failures = report.failures.contains(&pi);
            assert_eq!(direct.holds, !in_failures, "disagreement at pi = {pi}");
        }
        assert!(report.all_hold());
    }

    #[test]
    fn exhaustive_rejects_oversized_graphs() {
        let model = seeded_model(16, 2, 22);
        let g = Graph::edgeless(9);
        let groups = NodeGroups::single(9);
        assert!(matches!(
            exhaustive_predict(&model, &g, &groups),
            Err(Error::ExhaustiveLimitExceeded { .. })
        ));
        assert!(exhaustive_equivariance_report(&model, &g).is_err());
    }

    #[test]
    fn same_embedding_alignment_is_lossless() {
        // With the same-embedding strategy the network is fully equivariant,
        // so aligning f(τ(X)) by τ⁻¹ must reproduce f(X) for ANY τ.
        let model = seeded_model(6, 4, 23);
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let g = crate::graph::generate_random_graph(6, 0.5, &mut rng).unwrap();
        let groups = NodeGroups::single(6);
        let a = deterministic_assignment(Strategy::Same, &g, &groups).unwrap();
        let base = forward(&model, &g, &groups, &a).unwrap();
        for _ in 0..20 {
            let tau = sample_grouped_permutation(&groups, &mut rng);
            let pg = permute_graph(&g, &tau).unwrap();
            let pa = deterministic_assignment(Strategy::Same, &pg, &groups).unwrap();
            let out = forward(&model, &pg, &groups, &pa).unwrap();
            let aligned = align_to_original(&out, &tau).unwrap();
            assert!(aligned.max_abs_diff(&base) < 1e-6);
        }
    }
}
