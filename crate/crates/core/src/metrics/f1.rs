use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which labels enter the macro-F1 mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroMode {
    /// Skip labels that are absent from the gold sets and never predicted.
    #[default]
    ActiveLabels,
    /// Every label of the universe.
    AllLabels,
}

impl MacroMode {
    pub fn describe(self) -> &'static str {
        match self {
            MacroMode::ActiveLabels => "macro mean over labels with a gold or predicted occurrence",
            MacroMode::AllLabels => "macro mean over the full label universe",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    /// `2tp / (2tp + fp + fn)`, and 0 when the denominator is 0.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }

    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn is_empty(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub macro_f1: f64,
    pub micro_f1: f64,
}

pub(crate) fn check_aligned(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch {
            op: "metrics",
            left: vec![a],
            right: vec![b],
        });
    }
    Ok(())
}

/// Per-label confusion counts over aligned predicted and gold sets.
pub fn per_label_confusion(
    pred: &[BTreeSet<usize>],
    gold: &[BTreeSet<usize>],
    num_labels: usize,
) -> Result<Vec<Confusion>> {
    check_aligned(pred.len(), gold.len())?;
    let mut counts = vec![Confusion::default(); num_labels];
    for (p, g) in pred.iter().zip(gold) {
        for &l in p.iter().chain(g) {
            if l >= num_labels {
                return Err(Error::OutOfRange {
                    what: "labels",
                    index: l,
                    size: num_labels,
                });
            }
        }
        for &l in p {
            if g.contains(&l) {
                counts[l].tp += 1;
            } else {
                counts[l].fp += 1;
            }
        }
        for &l in g.difference(p) {
            counts[l].fn_ += 1;
        }
    }
    Ok(counts)
}

/// Macro and micro F1 with the default [`MacroMode`] and no out-of-universe
/// gold labels.
pub fn f1_scores(pred: &[BTreeSet<usize>], gold: &[BTreeSet<usize>], num_labels: usize) -> Result<F1Scores> {
    f1_scores_with(pred, gold, num_labels, &[], MacroMode::default())
}

/// Like [`f1_scores`], with `misses[d]` listing gold codes of document `d`
/// that lie outside the label universe. Each occurrence is a false negative
/// in the micro counts, and each distinct code joins the macro mean with F1 0.
pub fn f1_scores_with(
    pred: &[BTreeSet<usize>],
    gold: &[BTreeSet<usize>],
    num_labels: usize,
    misses: &[Vec<String>],
    mode: MacroMode,
) -> Result<F1Scores> {
    if !misses.is_empty() {
        check_aligned(misses.len(), gold.len())?;
    }
    let counts = per_label_confusion(pred, gold, num_labels)?;
    let mut unseen: BTreeMap<&str, u64> = BTreeMap::new();
    for code in misses.iter().flatten() {
        *unseen.entry(code).or_default() += 1;
    }
    let mut micro = Confusion::default();
    let mut macro_sum = 0.0;
    let mut macro_n = 0usize;
    for c in &counts {
        micro.add(c);
        if mode == MacroMode::AllLabels || !c.is_empty() {
            macro_sum += c.f1();
            macro_n += 1;
        }
    }
    micro.fn_ += unseen.values().sum::<u64>();
    macro_n += unseen.len();
    Ok(F1Scores {
        macro_f1: if macro_n == 0 { 0.0 } else { macro_sum / macro_n as f64 },
        micro_f1: micro.f1(),
    })
}
