//! Training loops. The heart is [`preferential_step`]: evaluate K sampled
//! node labelings of one example, keep only the cheapest one, and return
//! gradients through that winner alone (hard-EM over the labeling). All
//! baseline strategies run through the same loop with K = 1 and their own
//! deterministic assignment, so any metric difference is attributable to
//! the labeling strategy.

use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{permute_graph, permute_output, Graph, Permutation, PredictionMatrix};
use crate::labeling::{
    deterministic_assignment, sample_grouped_permutation, EmbeddingAssignment, NodeGroups,
    Strategy,
};
use crate::nn::{
    adam_step, backward, forward_train, kl_node_loss, AdamState, NodeClassifier, ParamSet,
    StepOutcome,
};
use crate::seed::stream;

/// One labeled example: a graph, per-node target distributions, and an
/// optional mask selecting which nodes contribute to the loss (auxiliary
/// nodes — e.g. clause nodes of a formula graph — are masked out).
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub graph: Graph,
    pub groups: NodeGroups,
    pub targets: PredictionMatrix,
    pub mask: Option<Vec<bool>>,
}

impl TrainSample {
    pub fn new(
        graph: Graph,
        groups: NodeGroups,
        targets: PredictionMatrix,
        mask: Option<Vec<bool>>,
    ) -> Result<TrainSample> {
        let n = graph.n();
        if groups.n() != n {
            return Err(Error::dim(format!(
                "groups cover {} nodes but graph has {n}",
                groups.n()
            )));
        }
        if targets.rows() != n {
            return Err(Error::dim(format!(
                "targets cover {} nodes but graph has {n}",
                targets.rows()
            )));
        }
        if let Some(m) = &mask {
            if m.len() != n {
                return Err(Error::dim(format!(
                    "mask covers {} nodes but graph has {n}",
                    m.len()
                )));
            }
            if !m.iter().any(|&b| b) {
                return Err(Error::invalid("mask", "no node contributes to the loss"));
            }
        }
        Ok(TrainSample {
            graph,
            groups,
            targets,
            mask,
        })
    }

    /// The sample relabeled by `p`: graph, target rows, and mask move
    /// together, so the example's meaning is unchanged.
    pub fn permuted(&self, p: &Permutation) -> Result<TrainSample> {
        let graph = permute_graph(&self.graph, p)?;
        let targets = permute_output(&self.targets, p)?;
        let mask = self.mask.as_ref().map(|m| {
            let mut out = vec![false; m.len()];
            for (v, &b) in m.iter().enumerate() {
                out[p.apply(v)] = b;
            }
            out
        });
        Ok(TrainSample {
            graph,
            groups: self.groups.clone(),
            targets,
            mask,
        })
    }
}

/// Knobs of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Labelings evaluated per sample per epoch (the K of the selection).
    pub k: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub strategy: Strategy,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("train config", "K must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(
                "train config",
                format!("learning rate {} must be positive", self.lr),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("train config", "batch size must be at least 1"));
        }
        // K-way selection is the defining move of the preferential strategy;
        // every other strategy trains on exactly one assignment per step.
        if self.k > 1 && self.strategy != Strategy::Preferential {
            return Err(Error::invalid(
                "train config",
                format!("strategy {} requires K = 1, got {}", self.strategy, self.k),
            ));
        }
        Ok(())
    }
}

/// What one call to [`preferential_step`] produced.
#[derive(Debug)]
pub enum StepResult {
    Selected(SelectedStep),
    /// Every candidate labeling produced a non-finite loss; no gradients.
    SkippedNonFinite,
}

/// The winning candidate of one K-way selection.
#[derive(Debug)]
pub struct SelectedStep {
    /// Loss of the winner (the minimum over candidates).
    pub loss: f64,
    /// Index of the winner among the K candidates (ties → lowest index).
    pub winner: usize,
    /// Loss of every candidate, in sample order; failed candidates hold
    /// `f64::INFINITY`.
    pub candidate_losses: Vec<f64>,
    /// Gradients through the winner alone.
    pub grads: ParamSet,
}

impl SelectedStep {
    /// Mean finite candidate loss minus the winner's loss: how much the
    /// K-way selection bought over an average draw. Zero when K = 1.
    pub fn selection_gap(&self) -> f64 {
        let finite: Vec<f64> = self
            .candidate_losses
            .iter()
            .copied()
            .filter(|l| l.is_finite())
            .collect();
        if finite.is_empty() {
            return 0.0;
        }
        finite.iter().sum::<f64>() / finite.len() as f64 - self.loss
    }
}

struct Candidate {
    loss: f64,
    graph: Graph,
    assignment: EmbeddingAssignment,
    targets: PredictionMatrix,
    mask: Option<Vec<bool>>,
    cache: crate::nn::ForwardCache,
}

/// Evaluate `k` candidate labelings of `sample` and return loss + gradients
/// of the cheapest one. Randomized strategies draw one fresh within-group
/// permutation per candidate (the sample is relabeled, then read off with
/// the position assignment); deterministic strategies use their own
/// assignment on the untouched sample. Each candidate gets its own dropout
/// realization. `rng` is consumed only for the K per-candidate stream seeds,
/// so the result is independent of evaluation order.
pub fn preferential_step<R: Rng>(
    model: &NodeClassifier,
    sample: &TrainSample,
    strategy: Strategy,
    k: usize,
    rng: &mut R,
) -> Result<StepResult> {
    if k == 0 {
        return Err(Error::invalid("preferential step", "K must be at least 1"));
    }
    let cand_seeds: Vec<u64> = (0..k).map(|_| rng.random()).collect();

    let outcomes: Vec<Result<Option<Candidate>>> = cand_seeds
        .into_par_iter()
        .map(|cand_seed| {
            let mut cand_rng = ChaCha8Rng::seed_from_u64(cand_seed);
            let (view, assignment) = if strategy.is_randomized() {
                let p = sample_grouped_permutation(&sample.groups, &mut cand_rng);
                let view = sample.permuted(&p)?;
                let a = deterministic_assignment(Strategy::Static, &view.graph, &view.groups)?;
                (view, a)
            } else {
                let a = deterministic_assignment(strategy, &sample.graph, &sample.groups)?;
                (sample.clone(), a)
            };
            let forward = forward_train(model, &view.graph, &view.groups, &assignment, &mut cand_rng);
            let (pred, cache) = match forward {
                Ok(ok) => ok,
                Err(Error::NonFinite { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let loss = match kl_node_loss(&pred, &view.targets, view.mask.as_deref()) {
                Ok(l) => l,
                Err(Error::NonFinite { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            Ok(Some(Candidate {
                loss,
                graph: view.graph,
                assignment,
                targets: view.targets,
                mask: view.mask,
                cache,
            }))
        })
        .collect();

    let mut candidates = Vec::with_capacity(k);
    for o in outcomes {
        candidates.push(o?);
    }
    let candidate_losses: Vec<f64> = candidates
        .iter()
        .map(|c| c.as_ref().map_or(f64::INFINITY, |c| c.loss))
        .collect();

    // Strict < keeps the lowest index on ties.
    let mut winner: Option<usize> = None;
    for (j, l) in candidate_losses.iter().enumerate() {
        if l.is_finite() && winner.is_none_or(|w| *l < candidate_losses[w]) {
            winner = Some(j);
        }
    }
    let Some(winner) = winner else {
        return Ok(StepResult::SkippedNonFinite);
    };

    let c = candidates[winner].take().expect("winner candidate present");
    let grads = backward(
        model,
        &c.graph,
        &sample.groups,
        &c.assignment,
        &c.targets,
        c.mask.as_deref(),
        &c.cache,
    )?;
    Ok(StepResult::Selected(SelectedStep {
        loss: c.loss,
        winner,
        candidate_losses,
        grads,
    }))
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean selected (winner) loss over the epoch's samples.
    pub mean_loss: f64,
    /// Mean selection gap (average candidate loss − winner loss).
    pub min_loss_gap: f64,
    pub seconds: f64,
    /// Samples whose every candidate went non-finite this epoch.
    pub skipped: usize,
}

/// The full training trace plus wherever the caller stored the final model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub checkpoint: Option<String>,
}

impl TrainReport {
    pub fn final_mean_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss,min_loss_gap,seconds\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.epoch, e.mean_loss, e.min_loss_gap, e.seconds
            ));
        }
        out
    }
}

/// Run `cfg.epochs` passes over `dataset`, one K-way selection per sample
/// per epoch, Adam updates per mini-batch of winners. Candidate labelings
/// are resampled every epoch. Deterministic per `cfg.seed`: every random
/// choice comes from a stream keyed on (seed, epoch, sample index).
pub fn train(
    mut model: NodeClassifier,
    dataset: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<(NodeClassifier, TrainReport)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (i, s) in dataset.iter().enumerate() {
        if s.targets.cols() != model.arch().classes {
            return Err(Error::dim(format!(
                "sample {i} has {} target classes but the model has {}",
                s.targets.cols(),
                model.arch().classes
            )));
        }
    }

    let mut state = AdamState::new(model.arch());
    let mut report = TrainReport::default();

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        {
            use rand::seq::SliceRandom;
            let mut order_rng = stream(cfg.seed, "epoch-order", &[epoch as u64]);
            order.shuffle(&mut order_rng);
        }

        let mut loss_sum = 0.0;
        let mut gap_sum = 0.0;
        let mut selected = 0usize;
        let mut skipped = 0usize;

        for chunk in order.chunks(cfg.batch_size) {
            let mut batch_grads: Option<ParamSet> = None;
            for &i in chunk {
                let mut step_rng = stream(cfg.seed, "train-step", &[epoch as u64, i as u64]);
                match preferential_step(&model, &dataset[i], cfg.strategy, cfg.k, &mut step_rng)? {
                    StepResult::Selected(step) => {
                        loss_sum += step.loss;
                        gap_sum += step.selection_gap();
                        selected += 1;
                        match &mut batch_grads {
                            Some(acc) => acc.add_assign(&step.grads),
                            None => batch_grads = Some(step.grads),
                        }
                    }
                    StepResult::SkippedNonFinite => skipped += 1,
                }
            }
            if let Some(grads) = batch_grads {
                // A skipped Adam step here means the batch summed to
                // non-finite gradients, which add_assign can introduce even
                // when each winner was finite; treat it as a skipped batch.
                if adam_step(&mut model, &grads, &mut state, cfg.lr)?
                    == StepOutcome::SkippedNonFinite
                {
                    skipped += chunk.len();
                }
            }
        }

        report.epochs.push(EpochStats {
            epoch,
            mean_loss: if selected > 0 { loss_sum / selected as f64 } else { f64::NAN },
            min_loss_gap: if selected > 0 { gap_sum / selected as f64 } else { 0.0 },
            seconds: started.elapsed().as_secs_f64(),
            skipped,
        });
    }

    Ok((model, report))
}
