//! Optimization of the summed parent and child cross-entropy, dev-set model
//! selection and threshold tuning.

mod thresholds;

pub use thresholds::{threshold_grid, tune_thresholds, tune_thresholds_with};

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{make_batches, Document};
use crate::error::{Error, Result};
use crate::hierarchy::LabelHierarchy;
use crate::metrics::{f1_scores_with, predict_labels_with, InferenceRule, MacroMode, Thresholds};
use crate::model::{forward_on_tape, ForwardOptions, ModelDims, ModelParams, ParamVars, PredictionScores};
use crate::numerics::{Adam, AdamConfig, Real, Reduction, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Always (0.5, 0.5).
    #[default]
    Fixed,
    /// Grid search on the dev set after every epoch.
    DevTuned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub embed_dim: usize,
    pub hidden_per_direction: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub max_sequence_length: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    pub threshold_policy: ThresholdPolicy,
    pub threshold_step: f64,
    pub detach_parent_probs: bool,
    pub dropout: f64,
    /// Weight of the parent loss; 0 together with `use_parent_attention =
    /// false` gives the flat single-stage ablation.
    pub parent_loss_weight: f64,
    pub use_parent_attention: bool,
    pub min_frequency: usize,
    /// Half-width of the uniform initialization.
    pub init_scale: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            embed_dim: 100,
            hidden_per_direction: 256,
            epochs: 50,
            batch_size: 8,
            max_sequence_length: 4000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            threshold_policy: ThresholdPolicy::Fixed,
            threshold_step: 0.05,
            detach_parent_probs: false,
            dropout: 0.0,
            parent_loss_weight: 1.0,
            use_parent_attention: true,
            min_frequency: 3,
            init_scale: 0.1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("embed_dim", self.embed_dim),
            ("hidden_per_direction", self.hidden_per_direction),
            ("batch_size", self.batch_size),
            ("max_sequence_length", self.max_sequence_length),
            ("min_frequency", self.min_frequency),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(alloc::format!("{name} must be at least 1")));
            }
        }
        if !(self.learning_rate > 0.0 && self.init_scale > 0.0) {
            return Err(Error::invalid("learning_rate and init_scale must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must lie in [0, 1)"));
        }
        if self.parent_loss_weight.is_nan() || self.parent_loss_weight < 0.0 {
            return Err(Error::invalid("parent_loss_weight must be >= 0"));
        }
        threshold_grid(self.threshold_step)?;
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.adam_epsilon,
        }
    }

    pub fn forward_options(&self) -> ForwardOptions {
        ForwardOptions {
            detach_parent_probs: self.detach_parent_probs,
            use_parent_attention: self.use_parent_attention,
            dropout: self.dropout,
        }
    }

    /// Without a trained parent stage, the parent gate is dropped.
    pub fn inference_rule(&self) -> InferenceRule {
        if self.parent_loss_weight > 0.0 {
            InferenceRule::Joint
        } else {
            InferenceRule::ChildOnly
        }
    }

    pub fn model_dims(&self, vocab_size: usize, h: &LabelHierarchy) -> ModelDims {
        ModelDims {
            vocab_size,
            embed_dim: self.embed_dim,
            hidden_per_direction: self.hidden_per_direction,
            num_parents: h.num_parents(),
            num_children: h.num_children(),
        }
    }

    pub fn init_params<T: Real>(&self, dims: ModelDims) -> Result<ModelParams<T>> {
        ModelParams::init(dims, self.init_scale, self.seed, !self.use_parent_attention)
    }
}

fn multi_hot<T: Real>(set: &BTreeSet<usize>, n: usize) -> Tensor<T> {
    Tensor::from_fn(&[n], |i| if set.contains(&i) { T::one() } else { T::zero() })
}

/// Mean over documents of `w · BCE(parents) + BCE(children)`, each
/// cross-entropy summed over labels. `outputs[i]` holds the parent and child
/// probability nodes of `docs[i]`.
pub fn total_loss<T: Real>(
    tape: &mut Tape<'_, T>,
    outputs: &[(Var, Var)],
    docs: &[&Document],
    parent_weight: f64,
) -> Result<Var> {
    if outputs.len() != docs.len() || docs.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "total_loss",
            left: alloc::vec![outputs.len()],
            right: alloc::vec![docs.len()],
        });
    }
    let mut total: Option<Var> = None;
    for (&(parent, child), doc) in outputs.iter().zip(docs) {
        let n_children = tape.shape(child).first().copied().unwrap_or(0);
        let child_targets = multi_hot(&doc.gold_children, n_children);
        let mut loss = tape.bce(child, &child_targets, Reduction::Sum)?;
        if parent_weight > 0.0 {
            let n_parents = tape.shape(parent).first().copied().unwrap_or(0);
            let parent_targets = multi_hot(&doc.gold_parents, n_parents);
            let mut p = tape.bce(parent, &parent_targets, Reduction::Sum)?;
            if parent_weight != 1.0 {
                p = tape.scale(p, T::of(parent_weight));
            }
            loss = tape.add(loss, p)?;
        }
        total = Some(match total {
            Some(t) => tape.add(t, loss)?,
            None => loss,
        });
    }
    let total = total.expect("at least one document");
    Ok(tape.scale(total, T::of(1.0 / docs.len() as f64)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_micro_f1: f64,
    pub dev_macro_f1: f64,
    pub wall_seconds: f64,
}

/// Hooks for the caller: a clock (the core has none) and a per-epoch callback.
pub trait TrainObserver {
    fn elapsed_seconds(&mut self) -> f64 {
        0.0
    }
    fn on_epoch(&mut self, _record: &EpochRecord) {}
}

impl TrainObserver for () {}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    /// Parameters from the epoch with the best dev child micro-F1, or the
    /// initialization when no epoch ran.
    pub params: ModelParams<T>,
    pub best_epoch: Option<usize>,
    pub thresholds: Thresholds,
    pub log: Vec<EpochRecord>,
}

/// Scores every document with fixed parameters.
pub fn score_documents<T: Real>(
    params: &ModelParams<T>,
    docs: &[Document],
    opts: &ForwardOptions,
) -> Result<Vec<PredictionScores>> {
    let opts = ForwardOptions { dropout: 0.0, ..*opts };
    docs.iter()
        .map(|d| crate::model::forward(params, &d.token_ids, &opts))
        .collect()
}

/// Child-level dev evaluation used for model selection.
pub struct DevEvaluation {
    pub thresholds: Thresholds,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

pub fn evaluate_dev<T: Real>(
    params: &ModelParams<T>,
    dev: &[Document],
    h: &LabelHierarchy,
    cfg: &TrainingConfig,
) -> Result<DevEvaluation> {
    let scores = score_documents(params, dev, &cfg.forward_options())?;
    let gold: Vec<BTreeSet<usize>> = dev.iter().map(|d| d.gold_children.clone()).collect();
    let misses: Vec<Vec<String>> = dev.iter().map(|d| d.unrecoverable.clone()).collect();
    let rule = cfg.inference_rule();
    let thresholds = match cfg.threshold_policy {
        ThresholdPolicy::DevTuned => {
            let extra = misses.iter().map(|m| m.len() as u64).sum();
            tune_thresholds_with(&scores, &gold, h, cfg.threshold_step, extra, rule)?
        }
        ThresholdPolicy::Fixed => Thresholds::default(),
    };
    let pred: Vec<BTreeSet<usize>> = scores
        .iter()
        .map(|s| predict_labels_with(s, h, thresholds, rule))
        .collect();
    let f1 = f1_scores_with(&pred, &gold, h.num_children(), &misses, MacroMode::default())?;
    Ok(DevEvaluation {
        thresholds,
        micro_f1: f1.micro_f1,
        macro_f1: f1.macro_f1,
    })
}

/// One optimizer step on a batch; returns the batch loss.
fn train_step<T: Real>(
    params: &mut ModelParams<T>,
    adam: &mut Adam<T>,
    docs: &[&Document],
    rows: (&[Vec<u32>], &[Vec<bool>]),
    cfg: &TrainingConfig,
    dropout_rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let opts = cfg.forward_options();
    let (loss_value, grads) = {
        let mut tape = Tape::new();
        let pv = ParamVars::track(&mut tape, params);
        let mut outputs = Vec::with_capacity(docs.len());
        for (ids, mask) in rows.0.iter().zip(rows.1) {
            let out = forward_on_tape(&mut tape, &pv, ids, mask, &opts, Some(dropout_rng))?;
            outputs.push((out.parent.probs, out.child.probs));
        }
        let loss = total_loss(&mut tape, &outputs, docs, cfg.parent_loss_weight)?;
        let value = tape.value(loss).item().as_f64();
        if !value.is_finite() {
            return Ok(value);
        }
        let mut grads = tape.backward(loss)?;
        let g: Vec<Tensor<T>> = pv.vars.iter().map(|&v| grads.take(v)).collect();
        (value, g)
    };
    adam.step(&mut params.tensors_mut(), &grads)?;
    Ok(loss_value)
}

/// Trains from a seeded initialization. Each epoch shuffles the training
/// set, takes one Adam step per batch and evaluates dev child micro-F1; the
/// best epoch's parameters are returned.
pub fn train<T: Real>(
    train_docs: &[Document],
    dev_docs: &[Document],
    h: &LabelHierarchy,
    vocab_size: usize,
    cfg: &TrainingConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome<T>> {
    let params = cfg.init_params(cfg.model_dims(vocab_size, h))?;
    train_from(params, train_docs, dev_docs, h, cfg, observer)
}

/// [`train`] starting from given parameters.
pub fn train_from<T: Real>(
    mut params: ModelParams<T>,
    train_docs: &[Document],
    dev_docs: &[Document],
    h: &LabelHierarchy,
    cfg: &TrainingConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let dims = params.dims()?;
    if dims.num_children != h.num_children() || dims.num_parents != h.num_parents() {
        return Err(Error::invalid("parameters do not match the label hierarchy"));
    }
    let mut outcome = TrainOutcome {
        params: params.clone(),
        best_epoch: None,
        thresholds: Thresholds::default(),
        log: Vec::new(),
    };
    if cfg.epochs == 0 {
        return Ok(outcome);
    }
    if train_docs.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if dev_docs.is_empty() {
        return Err(Error::invalid("dev set is empty; it is needed for model selection"));
    }
    let mut adam = Adam::new(cfg.adam(), &params.tensors());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0001);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0002);
    let mut best_f1 = f64::NEG_INFINITY;
    for epoch in 1..=cfg.epochs {
        let shuffle_seed = rand::Rng::gen::<u64>(&mut shuffle_rng);
        let batches = make_batches(train_docs, cfg.batch_size, Some(shuffle_seed))?;
        let mut loss_sum = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            let docs: Vec<&Document> = batch.indices.iter().map(|&i| &train_docs[i]).collect();
            let loss = train_step(
                &mut params,
                &mut adam,
                &docs,
                (&batch.token_ids, &batch.mask),
                cfg,
                &mut dropout_rng,
            )?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            loss_sum += loss;
        }
        let dev = evaluate_dev(&params, dev_docs, h, cfg)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / batches.len() as f64,
            dev_micro_f1: dev.micro_f1,
            dev_macro_f1: dev.macro_f1,
            wall_seconds: observer.elapsed_seconds(),
        };
        observer.on_epoch(&record);
        outcome.log.push(record);
        if dev.micro_f1 > best_f1 {
            best_f1 = dev.micro_f1;
            outcome.params = params.clone();
            outcome.best_epoch = Some(epoch);
            outcome.thresholds = dev.thresholds;
        }
    }
    Ok(outcome)
}
