use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{ModelParams, ParamVars};
use crate::data::{Batch, PAD_ID};
use crate::error::{Error, Result};
use crate::numerics::{Real, Tape, Tensor, Var};

/// Per-document output: `P(parents | x)` and `P(children | parents, x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionScores {
    pub parent_probs: Vec<f64>,
    pub child_probs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardOptions {
    /// Stop gradients from the child stage flowing into the parent probabilities.
    pub detach_parent_probs: bool,
    /// Include the `V_LP ⊙ att(L, P)` term in the child logits.
    pub use_parent_attention: bool,
    /// Inverted dropout on token embeddings and encoder states; only applied
    /// when a random source is passed to [`forward_on_tape`].
    pub dropout: f64,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        ForwardOptions {
            detach_parent_probs: false,
            use_parent_attention: true,
            dropout: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ParentStage {
    /// `[|L_P|]`
    pub probs: Var,
    /// Softmax over token positions, `[|L_P| × n]`.
    pub attention: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct ChildStage {
    /// `[|L|]`
    pub probs: Var,
    /// Softmax over token positions, `[|L| × n]`.
    pub doc_attention: Var,
    /// Softmax over parent labels, `[|L| × |L_P|]`.
    pub parent_attention: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct DocOutputs {
    pub states: Var,
    pub parent: ParentStage,
    pub child: ChildStage,
}

/// Token lookup, `[n × d_e]`; padding ids give zero rows.
pub fn embed<T: Real>(tape: &mut Tape<'_, T>, pv: &ParamVars, token_ids: &[u32]) -> Result<Var> {
    let ids: Vec<usize> = token_ids.iter().map(|&t| t as usize).collect();
    tape.embedding(pv.token_embeddings(), &ids, Some(PAD_ID as usize))
}

fn valid_length(mask: &[bool]) -> Result<usize> {
    let len = mask.iter().take_while(|&&m| m).count();
    if mask[len..].iter().any(|&m| m) {
        return Err(Error::invalid("mask must be a prefix of true values"));
    }
    Ok(len)
}

/// Bidirectional LSTM states `H`, `[n × 2h]`. Row `t` is the forward state
/// followed by the backward state; masked rows are zero.
pub fn encode_document_states<T: Real>(
    tape: &mut Tape<'_, T>,
    pv: &ParamVars,
    embeddings: Var,
    mask: &[bool],
) -> Result<Var> {
    let n = tape.shape(embeddings).first().copied().unwrap_or(0);
    if mask.len() != n {
        return Err(Error::ShapeMismatch {
            op: "encode_document_states",
            left: tape.shape(embeddings).to_vec(),
            right: alloc::vec![mask.len()],
        });
    }
    let len = valid_length(mask)?;
    let (wi, wh, b) = pv.lstm_forward();
    let fwd = tape.lstm(embeddings, wi, wh, b, len, false)?;
    let (wi, wh, b) = pv.lstm_backward();
    let bwd = tape.lstm(embeddings, wi, wh, b, len, true)?;
    tape.concat_cols(fwd, bwd)
}

/// Label-wise attention of `labels [k × d_e]` over `states [n × d]` through
/// `weight [d_e × d]`: `softmax(labels · tanh(weight · statesᵀ)) · states`.
fn label_attention<T: Real>(
    tape: &mut Tape<'_, T>,
    labels: Var,
    weight: Var,
    states: Var,
    mask: &[bool],
) -> Result<(Var, Var)> {
    let projected = tape.matmul_bt(weight, states)?;
    let projected = tape.tanh(projected);
    let scores = tape.matmul(labels, projected)?;
    let attention = tape.row_softmax(scores, Some(mask))?;
    let context = tape.matmul(attention, states)?;
    Ok((attention, context))
}

/// Label-wise output layer: row sums of `weight ⊙ context`.
fn labelwise_logits<T: Real>(tape: &mut Tape<'_, T>, weight: Var, context: Var) -> Result<Var> {
    let prod = tape.mul(weight, context)?;
    tape.sum_last_dim(prod)
}

/// First stage: `σ(rds(V ⊙ softmax(P · tanh(W Hᵀ)) H))`.
pub fn decode_parent<T: Real>(
    tape: &mut Tape<'_, T>,
    pv: &ParamVars,
    states: Var,
    mask: &[bool],
) -> Result<ParentStage> {
    let (attention, context) =
        label_attention(tape, pv.parent_embeddings(), pv.parent_attention(), states, mask)?;
    let logits = labelwise_logits(tape, pv.parent_output(), context)?;
    Ok(ParentStage {
        probs: tape.sigmoid(logits),
        attention,
    })
}

/// `W_P` with column `j` scaled by `parent_probs[j]`, `[d_e × |L_P|]`.
pub fn soft_parent_embedding<T: Real>(tape: &mut Tape<'_, T>, pv: &ParamVars, parent_probs: Var) -> Result<Var> {
    let num_parents = tape.shape(pv.soft_parent()).get(1).copied().unwrap_or(0);
    if tape.shape(parent_probs) != [num_parents] {
        return Err(Error::ShapeMismatch {
            op: "soft_parent_embedding",
            left: tape.shape(parent_probs).to_vec(),
            right: alloc::vec![num_parents],
        });
    }
    let row = tape.reshape(parent_probs, &[1, num_parents])?;
    tape.mul(pv.soft_parent(), row)
}

/// Second stage: child labels attend over the soft parent embeddings and over
/// the document states, and both contexts feed label-wise output layers.
pub fn decode_child<T: Real>(
    tape: &mut Tape<'_, T>,
    pv: &ParamVars,
    states: Var,
    mask: &[bool],
    parent_probs: Var,
    use_parent_attention: bool,
) -> Result<ChildStage> {
    let soft = soft_parent_embedding(tape, pv, parent_probs)?;
    let soft = tape.tanh(soft);
    let parent_scores = tape.matmul(pv.child_embeddings(), soft)?;
    let parent_attention = tape.row_softmax(parent_scores, None)?;
    let parent_context = tape.matmul(parent_attention, pv.parent_embeddings())?;

    let (doc_attention, doc_context) =
        label_attention(tape, pv.child_embeddings(), pv.child_attention(), states, mask)?;
    let mut logits = labelwise_logits(tape, pv.child_doc_output(), doc_context)?;
    if use_parent_attention {
        let parent_logits = labelwise_logits(tape, pv.child_parent_output(), parent_context)?;
        logits = tape.add(logits, parent_logits)?;
    }
    Ok(ChildStage {
        probs: tape.sigmoid(logits),
        doc_attention,
        parent_attention,
    })
}

fn apply_dropout<T: Real>(tape: &mut Tape<'_, T>, v: Var, rate: f64, rng: &mut ChaCha8Rng) -> Result<Var> {
    let keep = 1.0 - rate;
    let scale = T::of(1.0 / keep);
    let mask = (0..tape.value(v).numel())
        .map(|_| if rng.gen_bool(keep) { scale } else { T::zero() })
        .collect();
    tape.dropout(v, mask)
}

/// Full two-stage forward pass for one (possibly padded) document.
pub fn forward_on_tape<T: Real>(
    tape: &mut Tape<'_, T>,
    pv: &ParamVars,
    token_ids: &[u32],
    mask: &[bool],
    opts: &ForwardOptions,
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<DocOutputs> {
    let rate = opts.dropout;
    let mut e = embed(tape, pv, token_ids)?;
    if rate > 0.0 {
        if let Some(rng) = dropout_rng.as_deref_mut() {
            e = apply_dropout(tape, e, rate, rng)?;
        }
    }
    let mut states = encode_document_states(tape, pv, e, mask)?;
    if rate > 0.0 {
        if let Some(rng) = dropout_rng {
            states = apply_dropout(tape, states, rate, rng)?;
        }
    }
    let parent = decode_parent(tape, pv, states, mask)?;
    let parent_probs = if opts.detach_parent_probs {
        tape.detach(parent.probs)
    } else {
        parent.probs
    };
    let child = decode_child(tape, pv, states, mask, parent_probs, opts.use_parent_attention)?;
    Ok(DocOutputs { states, parent, child })
}

fn to_f64<T: Real>(t: &Tensor<T>) -> Vec<f64> {
    t.data().iter().map(|x| x.as_f64()).collect()
}

/// Inference for one unpadded document.
pub fn forward<T: Real>(params: &ModelParams<T>, token_ids: &[u32], opts: &ForwardOptions) -> Result<PredictionScores> {
    let mask = alloc::vec![true; token_ids.len()];
    let mut tape = Tape::new();
    let pv = ParamVars::constant(&mut tape, params);
    let out = forward_on_tape(&mut tape, &pv, token_ids, &mask, opts, None)?;
    Ok(PredictionScores {
        parent_probs: to_f64(tape.value(out.parent.probs)),
        child_probs: to_f64(tape.value(out.child.probs)),
    })
}

/// Inference over a padded batch, one score set per row.
pub fn forward_batch<T: Real>(params: &ModelParams<T>, batch: &Batch, opts: &ForwardOptions) -> Result<Vec<PredictionScores>> {
    batch
        .token_ids
        .iter()
        .zip(&batch.mask)
        .map(|(ids, mask)| {
            let mut tape = Tape::new();
            let pv = ParamVars::constant(&mut tape, params);
            let out = forward_on_tape(&mut tape, &pv, ids, mask, opts, None)?;
            Ok(PredictionScores {
                parent_probs: to_f64(tape.value(out.parent.probs)),
                child_probs: to_f64(tape.value(out.child.probs)),
            })
        })
        .collect()
}
