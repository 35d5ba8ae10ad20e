//! The dense graph-convolutional classifier: embedding tables, symmetric
//! normalized propagation with residual connections, softmax head, exact
//! hand-derived backward pass, KL loss, and Adam.
//!
//! Everything runs in f64 so gradient checks and equivariance comparisons
//! can use tight tolerances. Gradients are written out by hand for this
//! fixed architecture; `tests/gradients.rs` pits every one of them against
//! central finite differences.

use ndarray::{Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, PredictionMatrix};
use crate::labeling::{EmbeddingAssignment, NodeGroups};

/// One embedding table: `rows` learnable vectors of model width. Graphs with
/// several node kinds (e.g. literal and clause nodes) get one table per kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSpec {
    pub name: String,
    pub rows: usize,
}

impl TableSpec {
    pub fn new(name: impl Into<String>, rows: usize) -> TableSpec {
        TableSpec { name: name.into(), rows }
    }
}

/// Shape of a [`NodeClassifier`]: everything needed to allocate parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    /// Number of graph-convolution layers.
    pub layers: usize,
    /// Hidden width d; embeddings, hidden states, and the scalar-feature
    /// projection all live in R^d.
    pub hidden: usize,
    /// Output classes k.
    pub classes: usize,
    /// Embedding tables, one per node group (group i reads table i).
    pub tables: Vec<TableSpec>,
    /// Dropout probability on hidden activations during training.
    pub dropout: f64,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.classes == 0 {
            return Err(Error::invalid(
                "architecture",
                "layers, hidden width, and classes must be positive",
            ));
        }
        if self.tables.is_empty() || self.tables.iter().any(|t| t.rows == 0) {
            return Err(Error::invalid(
                "architecture",
                "at least one embedding table with positive rows is required",
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(
                "architecture",
                format!("dropout rate {} not in [0, 1)", self.dropout),
            ));
        }
        Ok(())
    }

    /// Parameter names in canonical (checkpoint) order with their shapes.
    pub fn parameter_shapes(&self) -> Vec<(String, (usize, usize))> {
        let d = self.hidden;
        let mut out = Vec::new();
        for t in &self.tables {
            out.push((format!("embed.{}", t.name), (t.rows, d)));
        }
        out.push(("feature_proj".to_string(), (1, d)));
        for l in 0..self.layers {
            out.push((format!("conv.{l}.w"), (d, d)));
            out.push((format!("conv.{l}.b"), (1, d)));
        }
        out.push(("out.w".to_string(), (d, self.classes)));
        out.push(("out.b".to_string(), (1, self.classes)));
        out
    }
}

/// Named parameter tensors in a fixed canonical order. Doubles as the
/// gradient bundle and as the Adam moment store.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Array2<f64>)>,
}

impl ParamSet {
    pub fn from_entries(entries: Vec<(String, Array2<f64>)>) -> ParamSet {
        ParamSet { entries }
    }

    pub fn zeros(arch: &Architecture) -> ParamSet {
        ParamSet {
            entries: arch
                .parameter_shapes()
                .into_iter()
                .map(|(name, shape)| (name, Array2::zeros(shape)))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), Array2::zeros(t.dim())))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn get(&self, name: &str) -> &Array2<f64> {
        &self
            .entries
            .iter()
            .find(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
            .1
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Array2<f64> {
        &mut self
            .entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
            .1
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &ParamSet) {
        debug_assert_eq!(self.len(), other.len());
        for ((_, a), (_, b)) in self.entries.iter_mut().zip(&other.entries) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|(_, t)| t.iter())
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    fn matches(&self, arch: &Architecture) -> Result<()> {
        let expect = arch.parameter_shapes();
        if expect.len() != self.entries.len() {
            return Err(Error::dim(format!(
                "expected {} parameter tensors, got {}",
                expect.len(),
                self.entries.len()
            )));
        }
        for ((name, shape), (got_name, tensor)) in expect.iter().zip(&self.entries) {
            if name != got_name || tensor.dim() != *shape {
                return Err(Error::dim(format!(
                    "parameter {got_name} {:?} where {name} {shape:?} expected",
                    tensor.dim()
                )));
            }
        }
        Ok(())
    }
}

/// The classifier: an [`Architecture`] plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeClassifier {
    arch: Architecture,
    params: ParamSet,
}

impl NodeClassifier {
    /// Fresh model: weights and embeddings uniform in (−1/√d, 1/√d),
    /// biases zero.
    pub fn init<R: Rng>(arch: Architecture, rng: &mut R) -> Result<NodeClassifier> {
        arch.validate()?;
        let bound = 1.0 / (arch.hidden as f64).sqrt();
        let entries = arch
            .parameter_shapes()
            .into_iter()
            .map(|(name, shape)| {
                let tensor = if name.ends_with(".b") || name == "out.b" {
                    Array2::zeros(shape)
                } else {
                    Array2::from_shape_simple_fn(shape, || rng.random_range(-bound..bound))
                };
                (name, tensor)
            })
            .collect();
        Ok(NodeClassifier {
            arch,
            params: ParamSet::from_entries(entries),
        })
    }

    /// Wrap explicit parameters (checkpoint load, hand-built test models).
    pub fn from_params(arch: Architecture, params: ParamSet) -> Result<NodeClassifier> {
        arch.validate()?;
        params.matches(&arch)?;
        if !params.is_finite() {
            return Err(Error::NonFinite {
                stage: "parameter load".to_string(),
            });
        }
        Ok(NodeClassifier { arch, params })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}

/// Symmetric-normalized adjacency with self-loops:
/// Â = D̃^{-1/2} (A + I) D̃^{-1/2}, D̃ = diag(degree + 1).
pub fn normalized_adjacency(g: &Graph) -> Array2<f64> {
    let n = g.n();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| 1.0 / ((g.degree(v).expect("v < n") as f64 + 1.0).sqrt()))
        .collect();
    let mut a_hat = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let a = if i == j { 1.0 } else { f64::from(g.adjacency()[(i, j)]) };
            a_hat[(i, j)] = a * inv_sqrt[i] * inv_sqrt[j];
        }
    }
    a_hat
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    a_hat: Array2<f64>,
    /// H^l entering layer l (H⁰, then post-dropout states), length L.
    layer_inputs: Vec<Array2<f64>>,
    /// Pre-activations Z^l = Â H^l W^l + b^l, length L.
    preacts: Vec<Array2<f64>>,
    /// Inverted-dropout multipliers (entries 0 or 1/(1−rate)); None in eval.
    dropout_masks: Vec<Option<Array2<f64>>>,
    /// H^L feeding the output head.
    final_hidden: Array2<f64>,
    probs: Array2<f64>,
}

impl ForwardCache {
    pub fn probabilities(&self) -> &Array2<f64> {
        &self.probs
    }
}

/// Deterministic forward pass with dropout disabled.
pub fn forward(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    a: &EmbeddingAssignment,
) -> Result<PredictionMatrix> {
    let (pred, _) = run_forward(model, g, groups, a, None::<&mut rand_chacha::ChaCha8Rng>)?;
    Ok(pred)
}

/// Training-mode forward: fresh inverted-dropout mask per layer from `rng`.
/// Returns the cache consumed by [`backward`].
pub fn forward_train<R: Rng>(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    a: &EmbeddingAssignment,
    rng: &mut R,
) -> Result<(PredictionMatrix, ForwardCache)> {
    run_forward(model, g, groups, a, Some(rng))
}

/// Eval-mode forward that also returns the cache (for gradient checks with
/// dropout off).
pub fn forward_cached(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    a: &EmbeddingAssignment,
) -> Result<(PredictionMatrix, ForwardCache)> {
    run_forward(model, g, groups, a, None::<&mut rand_chacha::ChaCha8Rng>)
}

fn run_forward<R: Rng>(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    a: &EmbeddingAssignment,
    mut dropout_rng: Option<&mut R>,
) -> Result<(PredictionMatrix, ForwardCache)> {
    let n = g.n();
    let arch = &model.arch;
    let d = arch.hidden;
    if groups.n() != n {
        return Err(Error::dim(format!(
            "node groups cover {} nodes but graph has {n}",
            groups.n()
        )));
    }
    if a.len() != n {
        return Err(Error::dim(format!(
            "assignment covers {} nodes but graph has {n}",
            a.len()
        )));
    }

    // H⁰: one row per node, from the node's table row or projected feature.
    let mut h0 = Array2::<f64>::zeros((n, d));
    match a {
        EmbeddingAssignment::Indexed(rows) => {
            if groups.group_count() != arch.tables.len() {
                return Err(Error::dim(format!(
                    "{} node groups but {} embedding tables",
                    groups.group_count(),
                    arch.tables.len()
                )));
            }
            for v in 0..n {
                let gi = groups.group_of(v);
                let table = &arch.tables[gi];
                if rows[v] >= table.rows {
                    return Err(Error::invalid(
                        "embedding assignment",
                        format!(
                            "node {v} wants row {} of table {} ({} rows)",
                            rows[v], table.name, table.rows
                        ),
                    ));
                }
                let embed = model.params.get(&format!("embed.{}", table.name));
                h0.row_mut(v).assign(&embed.row(rows[v]));
            }
        }
        EmbeddingAssignment::Features(feats) => {
            let proj = model.params.get("feature_proj");
            for v in 0..n {
                for j in 0..d {
                    h0[(v, j)] = feats[v] * proj[(0, j)];
                }
            }
        }
    }

    let a_hat = normalized_adjacency(g);
    let keep = 1.0 - arch.dropout;

    let mut h = h0;
    let mut layer_inputs = Vec::with_capacity(arch.layers);
    let mut preacts = Vec::with_capacity(arch.layers);
    let mut dropout_masks = Vec::with_capacity(arch.layers);

    for l in 0..arch.layers {
        let w = model.params.get(&format!("conv.{l}.w"));
        let b = model.params.get(&format!("conv.{l}.b"));
        let mut z = a_hat.dot(&h).dot(w);
        z += &b.row(0);
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                stage: format!("conv layer {l} pre-activation"),
            });
        }
        layer_inputs.push(h.clone());
        preacts.push(z.clone());

        // Residual around the convolution, then inverted dropout.
        let mut next = z.mapv(|v| v.max(0.0)) + &h;
        let mask = match dropout_rng.as_deref_mut() {
            Some(rng) if arch.dropout > 0.0 => {
                let m = Array2::from_shape_simple_fn((n, d), || {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                next *= &m;
                Some(m)
            }
            _ => None,
        };
        dropout_masks.push(mask);
        h = next;
    }

    let logits = h.dot(model.params.get("out.w")) + &model.params.get("out.b").row(0);
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            stage: "output logits".to_string(),
        });
    }
    let probs = row_softmax(&logits);
    let pred = PredictionMatrix::new(probs.clone())?;
    Ok((
        pred,
        ForwardCache {
            a_hat,
            layer_inputs,
            preacts,
            dropout_masks,
            final_hidden: h,
            probs,
        },
    ))
}

fn row_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Prediction entries are clamped at this floor inside the KL sum, so a
/// zero prediction against a positive target yields a large finite loss
/// instead of NaN.
pub const KL_EPSILON: f64 = 1e-12;

/// Σ over (included) nodes of KL(target row ‖ prediction row), in nats.
/// With one-hot targets this is the per-node cross-entropy. `mask` selects
/// the rows that count; `None` includes every row.
pub fn kl_node_loss(
    pred: &PredictionMatrix,
    target: &PredictionMatrix,
    mask: Option<&[bool]>,
) -> Result<f64> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(Error::dim(format!(
            "prediction {}x{} vs target {}x{}",
            pred.rows(),
            pred.cols(),
            target.rows(),
            target.cols()
        )));
    }
    if let Some(m) = mask {
        if m.len() != pred.rows() {
            return Err(Error::dim(format!(
                "mask covers {} rows but matrices have {}",
                m.len(),
                pred.rows()
            )));
        }
    }
    let mut total = 0.0;
    for i in 0..pred.rows() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        for c in 0..pred.cols() {
            let t = target.get(i, c);
            if t > 0.0 {
                total += t * (t / pred.get(i, c).max(KL_EPSILON)).ln();
            }
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite {
            stage: "kl loss".to_string(),
        });
    }
    Ok(total)
}

/// Gradient of [`kl_node_loss`] ∘ forward with respect to every parameter,
/// evaluated through the given cache (which fixes the dropout masks).
pub fn backward(
    model: &NodeClassifier,
    g: &Graph,
    groups: &NodeGroups,
    a: &EmbeddingAssignment,
    target: &PredictionMatrix,
    mask: Option<&[bool]>,
    cache: &ForwardCache,
) -> Result<ParamSet> {
    let n = g.n();
    let arch = &model.arch;
    if target.rows() != n || target.cols() != arch.classes {
        return Err(Error::dim(format!(
            "target {}x{} vs expected {n}x{}",
            target.rows(),
            target.cols(),
            arch.classes
        )));
    }
    let mut grads = ParamSet::zeros(arch);

    // Softmax + KL collapse to (p − t) per counted row.
    let mut d_logits = cache.probs.clone();
    for i in 0..n {
        if mask.is_some_and(|m| !m[i]) {
            d_logits.row_mut(i).fill(0.0);
        } else {
            for c in 0..arch.classes {
                d_logits[(i, c)] -= target.get(i, c);
            }
        }
    }

    *grads.get_mut("out.w") = cache.final_hidden.t().dot(&d_logits);
    *grads.get_mut("out.b") = d_logits
        .sum_axis(Axis(0))
        .insert_axis(Axis(0))
        .to_owned();
    let mut d_h = d_logits.dot(&model.params.get("out.w").t());

    for l in (0..arch.layers).rev() {
        // Undo dropout: H^{l+1} = S^l ⊙ mask.
        let d_s = match &cache.dropout_masks[l] {
            Some(m) => d_h * m,
            None => d_h,
        };
        // S^l = H^l + ReLU(Z^l).
        let d_relu = &d_s * &cache.preacts[l].mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let w = model.params.get(&format!("conv.{l}.w"));
        let propagated = cache.a_hat.dot(&cache.layer_inputs[l]);
        *grads.get_mut(&format!("conv.{l}.w")) = propagated.t().dot(&d_relu);
        *grads.get_mut(&format!("conv.{l}.b")) = d_relu
            .sum_axis(Axis(0))
            .insert_axis(Axis(0))
            .to_owned();
        // d/dH of Â H W is Âᵀ (dZ) Wᵀ; Â is symmetric.
        d_h = d_s + cache.a_hat.dot(&d_relu.dot(&w.t()));
    }

    match a {
        EmbeddingAssignment::Indexed(rows) => {
            for v in 0..n {
                let table = &arch.tables[groups.group_of(v)];
                let gt = grads.get_mut(&format!("embed.{}", table.name));
                let mut row = gt.row_mut(rows[v]);
                row += &d_h.row(v);
            }
        }
        EmbeddingAssignment::Features(feats) => {
            let gp = grads.get_mut("feature_proj");
            for v in 0..n {
                for j in 0..arch.hidden {
                    gp[(0, j)] += feats[v] * d_h[(v, j)];
                }
            }
        }
    }

    if !grads.is_finite() {
        return Err(Error::NonFinite {
            stage: "backward".to_string(),
        });
    }
    Ok(grads)
}

/// Adam first/second-moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: ParamSet,
    v: ParamSet,
    t: u64,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

impl AdamState {
    pub fn new(arch: &Architecture) -> AdamState {
        AdamState {
            m: ParamSet::zeros(arch),
            v: ParamSet::zeros(arch),
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}

/// What [`adam_step`] did with the supplied gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// Gradients contained NaN/Inf; parameters and moments left untouched.
    SkippedNonFinite,
}

/// One Adam update (β₁=0.9, β₂=0.999, ε=1e-8, bias-corrected). Non-finite
/// gradients skip the step and report; non-finite *parameters* after an
/// applied step are a hard error.
pub fn adam_step(
    model: &mut NodeClassifier,
    grads: &ParamSet,
    state: &mut AdamState,
    lr: f64,
) -> Result<StepOutcome> {
    if !grads.is_finite() {
        return Ok(StepOutcome::SkippedNonFinite);
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    for (((_, p), (_, g)), ((_, m), (_, v))) in model
        .params
        .entries
        .iter_mut()
        .zip(&grads.entries)
        .zip(state.m.entries.iter_mut().zip(state.v.entries.iter_mut()))
    {
        ndarray::Zip::from(p)
            .and(g)
            .and(m)
            .and(v)
            .for_each(|p, &g, m, v| {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            });
    }
    if !model.params.is_finite() {
        return Err(Error::NonFinite {
            stage: "adam update".to_string(),
        });
    }
    Ok(StepOutcome::Applied)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::{deterministic_assignment, Strategy};
    use ndarray::array;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_arch(layers: usize, hidden: usize, classes: usize, rows: usize) -> Architecture {
        Architecture {
            layers,
            hidden,
            classes,
            tables: vec![TableSpec::new("node", rows)],
            dropout: 0.0,
        }
    }

    #[test]
    fn normalized_adjacency_two_node_edge() {
        // Single edge: A+I is all-ones, degrees+1 are 2, so Â is all 1/2.
        let g = Graph::path(2);
        let a_hat = normalized_adjacency(&g);
        for v in a_hat.iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_hand_computed_two_nodes() {
        // d=2, L=1, hand-set weights on the single-edge graph; expected
        // output worked through the layer rule by explicit arithmetic.
        let arch = tiny_arch(1, 2, 2, 2);
        let mut params = ParamSet::zeros(&arch);
        *params.get_mut("embed.node") = array![[1.0, 0.0], [0.0, 1.0]];
        *params.get_mut("conv.0.w") = array![[2.0, 0.0], [0.0, 2.0]];
        *params.get_mut("conv.0.b") = array![[0.1, -0.2]];
        *params.get_mut("out.w") = array![[1.0, -1.0], [0.0, 1.0]];
        let model = NodeClassifier::from_params(arch, params).unwrap();

        let g = Graph::path(2);
        let groups = NodeGroups::single(2);
        let a = deterministic_assignment(Strategy::Static, &g, &groups).unwrap();
        let pred = forward(&model, &g, &groups, &a).unwrap();

        // H0 = I. ÂH0 = [[.5,.5],[.5,.5]]. ÂH0·W = [[1,1],[1,1]].
        // Z = [[1.1,.8],[1.1,.8]] (all positive, ReLU is identity).
        // H1 = H0 + Z = [[2.1,.8],[1.1,1.8]].
        // logits = H1·out.w = [[2.1, -1.3], [1.1, 0.7]].
        let rows = [[2.1_f64, -1.3], [1.1, 0.7]];
        for (i, row) in rows.iter().enumerate() {
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            for (c, v) in row.iter().enumerate() {
                assert!(
                    (pred.get(i, c) - v.exp() / z).abs() < 1e-12,
                    "row {i} class {c}"
                );
            }
        }
    }

    #[test]
    fn same_embedding_rows_identical_on_c4() {
        // Every C4 node sees the same input vector and the same neighborhood
        // shape, so all four output rows coincide exactly.
        let g = Graph::cycle(4);
        let groups = NodeGroups::single(4);
        let a = deterministic_assignment(Strategy::Same, &g, &groups).unwrap();
        let model = NodeClassifier::init(tiny_arch(3, 4, 2, 4), &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        let pred = forward(&model, &g, &groups, &a).unwrap();
        for i in 1..4 {
            for c in 0..2 {
                assert_eq!(pred.get(i, c), pred.get(0, c));
            }
        }
    }

    #[test]
    fn single_node_output_is_distribution() {
        let g = Graph::from_edges(1, &[]).unwrap();
        let groups = NodeGroups::single(1);
        let a = deterministic_assignment(Strategy::Static, &g, &groups).unwrap();
        let model = NodeClassifier::init(tiny_arch(2, 3, 4, 1), &mut ChaCha8Rng::seed_from_u64(2))
            .unwrap();
        let pred = forward(&model, &g, &groups, &a).unwrap();
        let sum: f64 = (0..4).map(|c| pred.get(0, c)).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn forward_rejects_out_of_range_embedding_row() {
        let g = Graph::path(3);
        let groups = NodeGroups::single(3);
        let model = NodeClassifier::init(tiny_arch(1, 2, 2, 2), &mut ChaCha8Rng::seed_from_u64(3))
            .unwrap();
        // Static wants rows 0..3 but the table only has 2.
        let a = deterministic_assignment(Strategy::Static, &g, &groups).unwrap();
        assert!(forward(&model, &g, &groups, &a).is_err());
    }

    #[test]
    fn eval_forward_is_deterministic_and_dropout_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = crate::graph::generate_random_graph(6, 0.5, &mut rng).unwrap();
        let groups = NodeGroups::single(6);
        let a = deterministic_assignment(Strategy::Static, &g, &groups).unwrap();
        let mut arch = tiny_arch(2, 4, 2, 6);
        arch.dropout = 0.5;
        let model = NodeClassifier::init(arch, &mut rng).unwrap();
        let p1 = forward(&model, &g, &groups, &a).unwrap();
        let p2 = forward(&model, &g, &groups, &a).unwrap();
        assert_eq!(p1, p2);
        // Training mode with a dropout rate actually perturbs the output.
        let (p3, _) = forward_train(&model, &g, &groups, &a, &mut rng).unwrap();
        assert_ne!(p1, p3);
    }

    #[test]
    fn kl_loss_examples() {
        let t = PredictionMatrix::one_hot(&[0], 2).unwrap();
        let p = PredictionMatrix::new(array![[0.5, 0.5]]).unwrap();
        let loss = kl_node_loss(&p, &t, None).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);

        // pred == target → 0, including the 0·log0 corner.
        assert_eq!(kl_node_loss(&t, &t, None).unwrap(), 0.0);

        // Additivity over nodes.
        let t2 = PredictionMatrix::one_hot(&[0, 1], 2).unwrap();
        let p2 = PredictionMatrix::new(array![[0.5, 0.5], [0.25, 0.75]]).unwrap();
        let a = kl_node_loss(
            &PredictionMatrix::new(array![[0.5, 0.5]]).unwrap(),
            &PredictionMatrix::one_hot(&[0], 2).unwrap(),
            None,
        )
        .unwrap();
        let b = kl_node_loss(
            &PredictionMatrix::new(array![[0.25, 0.75]]).unwrap(),
            &PredictionMatrix::one_hot(&[1], 2).unwrap(),
            None,
        )
        .unwrap();
        let combined = kl_node_loss(&p2, &t2, None).unwrap();
        assert!((combined - (a + b)).abs() < 1e-12);
    }

    #[test]
    fn kl_loss_mask_drops_rows() {
        let t = PredictionMatrix::one_hot(&[0, 1], 2).unwrap();
        let p = PredictionMatrix::new(array![[0.5, 0.5], [0.9, 0.1]]).unwrap();
        let only_first = kl_node_loss(&p, &t, Some(&[true, false])).unwrap();
        assert!((only_first - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn kl_loss_clamps_zero_predictions() {
        // Prediction row [1, 0] against target [0, 1]: clamped at 1e-12,
        // loss = ln(1e12), finite.
        let t = PredictionMatrix::one_hot(&[1], 2).unwrap();
        let p = PredictionMatrix::one_hot(&[0], 2).unwrap();
        let loss = kl_node_loss(&p, &t, None).unwrap();
        assert!((loss - (1.0 / KL_EPSILON).ln()).abs() < 1e-9);
    }

    #[test]
    fn backward_zero_when_pred_equals_target() {
        // Feed the model's own output back as the target: d_logits = p − t = 0,
        // so every gradient vanishes.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = Graph::cycle(5);
        let groups = NodeGroups::single(5);
        let a = deterministic_assignment(Strategy::Static, &g, &groups).unwrap();
        let model = NodeClassifier::init(tiny_arch(2, 3, 2, 5), &mut rng).unwrap();
        let (pred, cache) = forward_cached(&model, &g, &groups, &a).unwrap();
        let grads = backward(&model, &g, &groups, &a, &pred, None, &cache).unwrap();
        assert_eq!(grads.max_abs(), 0.0);
    }

    #[test]
    fn unassigned_embedding_rows_get_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = Graph::path(2);
        let groups = NodeGroups::single(2);
        // Table has 5 rows; Static uses rows 0 and 1 only.
        let model = NodeClassifier::init(tiny_arch(1, 3, 2, 5), &mut rng).unwrap();
        let a = deterministic_assignment(Strategy::Static, &g, &groups).unwrap();
        let (_, cache) = forward_cached(&model, &g, &groups, &a).unwrap();
        let target = PredictionMatrix::one_hot(&[0, 1], 2).unwrap();
        let grads = backward(&model, &g, &groups, &a, &target, None, &cache).unwrap();
        let embed_grad = grads.get("embed.node");
        for r in 2..5 {
            for j in 0..3 {
                assert_eq!(embed_grad[(r, j)], 0.0);
            }
        }
        // And the rows that were used are not all zero.
        assert!(embed_grad.row(0).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut model = NodeClassifier::init(tiny_arch(1, 2, 2, 2), &mut rng).unwrap();
        let before = model.params().clone();
        let zeros = before.zeros_like();
        let mut state = AdamState::new(model.arch());
        // m and v stay zero, so m̂/(√v̂+ε) = 0 and nothing moves.
        adam_step(&mut model, &zeros, &mut state, 0.1).unwrap();
        assert_eq!(*model.params(), before);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        // Closed form: after one step m̂ = g, v̂ = g², update = lr·g/(|g|+ε)
        // ≈ lr·sign(g).
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut model = NodeClassifier::init(tiny_arch(1, 2, 2, 2), &mut rng).unwrap();
        let before = model.params().clone();
        let mut grads = before.zeros_like();
        grads.get_mut("conv.0.w")[(0, 0)] = 0.37;
        let mut state = AdamState::new(model.arch());
        adam_step(&mut model, &grads, &mut state, 1e-3).unwrap();
        let delta = before.get("conv.0.w")[(0, 0)] - model.params().get("conv.0.w")[(0, 0)];
        assert!((delta - 1e-3).abs() < 1e-9, "delta {delta}");
        // Untouched parameters stay put.
        assert_eq!(
            model.params().get("out.w"),
            before.get("out.w")
        );
    }

    #[test]
    fn adam_skips_non_finite_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut model = NodeClassifier::init(tiny_arch(1, 2, 2, 2), &mut rng).unwrap();
        let before = model.params().clone();
        let mut grads = before.zeros_like();
        grads.get_mut("out.w")[(0, 0)] = f64::NAN;
        let mut state = AdamState::new(model.arch());
        let outcome = adam_step(&mut model, &grads, &mut state, 1e-3).unwrap();
        assert_eq!(outcome, StepOutcome::SkippedNonFinite);
        assert_eq!(*model.params(), before);
        assert_eq!(state.steps_taken(), 0);
    }

    #[test]
    fn adam_is_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(12);
            let mut model = NodeClassifier::init(tiny_arch(2, 3, 2, 4), &mut rng).unwrap();
            let mut state = AdamState::new(model.arch());
            let g = Graph::cycle(4);
            let groups = NodeGroups::single(4);
            let a = deterministic_assignment(Strategy::Static, &g, &groups).unwrap();
            let target = PredictionMatrix::one_hot(&[0, 1, 0, 1], 2).unwrap();
            for _ in 0..100 {
                let (_, cache) = forward_cached(&model, &g, &groups, &a).unwrap();
                let grads = backward(&model, &g, &groups, &a, &target, None, &cache).unwrap();
                adam_step(&mut model, &grads, &mut state, 1e-3).unwrap();
            }
            model
        };
        let m1 = run();
        let m2 = run();
        // Bitwise identity, not approximate agreement.
        for ((_, a), (_, b)) in m1.params().entries.iter().zip(&m2.params().entries) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn feature_assignment_uses_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g = Graph::cycle(4);
        let groups = NodeGroups::single(4);
        let a = deterministic_assignment(Strategy::DegreeFeature, &g, &groups).unwrap();
        let model = NodeClassifier::init(tiny_arch(1, 3, 2, 4), &mut rng).unwrap();
        let pred = forward(&model, &g, &groups, &a).unwrap();
        // C4 is degree-regular: all feature values equal, so rows coincide.
        for i in 1..4 {
            for c in 0..2 {
                assert_eq!(pred.get(i, c), pred.get(0, c));
            }
        }
        // The projection receives gradient; embedding tables do not.
        let (_, cache) = forward_cached(&model, &g, &groups, &a).unwrap();
        let target = PredictionMatrix::one_hot(&[0, 1, 0, 1], 2).unwrap();
        let grads = backward(&model, &g, &groups, &a, &target, None, &cache).unwrap();
        assert!(grads.get("feature_proj").iter().any(|&v| v != 0.0));
        assert!(grads.get("embed.node").iter().all(|&v| v == 0.0));
    }
}
