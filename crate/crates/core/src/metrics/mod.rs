//! The two-stage inference rule and the evaluation protocol: macro/micro AUC,
//! macro/micro F1, precision@k, parent-level metrics and frequency groups.

mod auc;
mod f1;
mod groups;
mod precision;

pub use auc::{auc_scores, binary_auc, AucScores};
pub use f1::{f1_scores, f1_scores_with, per_label_confusion, Confusion, F1Scores, MacroMode};
pub use groups::{group_by_frequency, group_micro_f1, label_frequencies, FrequencyGroup, GroupF1};
pub use precision::{precision_at_k, top_k};

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::data::Document;
use crate::error::{Error, Result};
use crate::hierarchy::LabelHierarchy;
use crate::model::PredictionScores;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub parent: f64,
    pub child: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            parent: 0.5,
            child: 0.5,
        }
    }
}

impl Thresholds {
    pub fn new(parent: f64, child: f64) -> Result<Self> {
        let open = |x: f64| x > 0.0 && x < 1.0;
        if !open(parent) || !open(child) {
            return Err(Error::invalid(format!(
                "thresholds must lie in (0, 1), got ({parent}, {child})"
            )));
        }
        Ok(Thresholds { parent, child })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceRule {
    /// A child is assigned when its own score and its parent's score both
    /// exceed their thresholds.
    #[default]
    Joint,
    /// Only the child score is thresholded.
    ChildOnly,
}

/// Children assigned under the joint two-stage rule.
pub fn predict_labels(scores: &PredictionScores, h: &LabelHierarchy, t: Thresholds) -> BTreeSet<usize> {
    predict_labels_with(scores, h, t, InferenceRule::Joint)
}

pub fn predict_labels_with(
    scores: &PredictionScores,
    h: &LabelHierarchy,
    t: Thresholds,
    rule: InferenceRule,
) -> BTreeSet<usize> {
    scores
        .child_probs
        .iter()
        .enumerate()
        .filter(|&(c, &p)| {
            p > t.child
                && (rule == InferenceRule::ChildOnly || scores.parent_probs[h.parent_index_of(c)] > t.parent)
        })
        .map(|(c, _)| c)
        .collect()
}

/// Parents whose probability exceeds `threshold`.
pub fn predict_parents(scores: &PredictionScores, threshold: f64) -> BTreeSet<usize> {
    scores
        .parent_probs
        .iter()
        .enumerate()
        .filter(|&(_, &p)| p > threshold)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub macro_auc: f64,
    pub micro_auc: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub precision_at_k: f64,
}

/// All five metrics for one label level.
pub fn level_metrics(
    scores: &[Vec<f64>],
    pred: &[BTreeSet<usize>],
    gold: &[BTreeSet<usize>],
    misses: &[Vec<String>],
    k: usize,
    mode: MacroMode,
) -> Result<LevelMetrics> {
    let num_labels = scores.first().map_or(0, Vec::len);
    let auc = auc_scores(scores, gold)?;
    let f1 = f1_scores_with(pred, gold, num_labels, misses, mode)?;
    Ok(LevelMetrics {
        macro_auc: auc.macro_auc,
        micro_auc: auc.micro_auc,
        macro_f1: f1.macro_f1,
        micro_f1: f1.micro_f1,
        precision_at_k: precision_at_k(scores, gold, k)?,
    })
}

/// Parent-level metrics: parent scores against gold parent sets, with the
/// parent threshold alone deciding predictions.
pub fn evaluate_parent_level(
    scores: &[PredictionScores],
    gold_parents: &[BTreeSet<usize>],
    parent_misses: &[Vec<String>],
    parent_threshold: f64,
    k: usize,
    mode: MacroMode,
) -> Result<LevelMetrics> {
    let matrix: Vec<Vec<f64>> = scores.iter().map(|s| s.parent_probs.clone()).collect();
    let pred: Vec<BTreeSet<usize>> = scores.iter().map(|s| predict_parents(s, parent_threshold)).collect();
    level_metrics(&matrix, &pred, gold_parents, parent_misses, k, mode)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub num_documents: usize,
    pub k: usize,
    pub thresholds: Thresholds,
    pub inference_rule: InferenceRule,
    pub macro_f1_convention: String,
    #[serde(flatten)]
    pub child: LevelMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<LevelMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_groups: Option<Vec<GroupF1>>,
}

#[derive(Clone, Debug, Default)]
pub struct EvalOptions {
    pub rule: InferenceRule,
    pub macro_mode: MacroMode,
    /// Also report parent-level metrics.
    pub parents: bool,
    /// Child label → training frequency group, for the per-group breakdown.
    pub groups: Option<Vec<FrequencyGroup>>,
}

/// Child-level report, optionally with parent metrics and frequency groups.
pub fn evaluate(
    scores: &[PredictionScores],
    docs: &[Document],
    h: &LabelHierarchy,
    thresholds: Thresholds,
    k: usize,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    f1::check_aligned(scores.len(), docs.len())?;
    let matrix: Vec<Vec<f64>> = scores.iter().map(|s| s.child_probs.clone()).collect();
    let pred: Vec<BTreeSet<usize>> = scores
        .iter()
        .map(|s| predict_labels_with(s, h, thresholds, opts.rule))
        .collect();
    let gold: Vec<BTreeSet<usize>> = docs.iter().map(|d| d.gold_children.clone()).collect();
    let misses: Vec<Vec<String>> = docs.iter().map(|d| d.unrecoverable.clone()).collect();
    let child = level_metrics(&matrix, &pred, &gold, &misses, k, opts.macro_mode)?;
    let parent = if opts.parents {
        let gold_p: Vec<BTreeSet<usize>> = docs.iter().map(|d| d.eval_parents(h)).collect();
        let miss_p: Vec<Vec<String>> = docs.iter().map(|d| d.unrecoverable_parents(h)).collect();
        let k_p = k.min(h.num_parents());
        Some(evaluate_parent_level(scores, &gold_p, &miss_p, thresholds.parent, k_p, opts.macro_mode)?)
    } else {
        None
    };
    let frequency_groups = match &opts.groups {
        Some(groups) => Some(group_micro_f1(&pred, &gold, groups, &misses)?),
        None => None,
    };
    Ok(MetricsReport {
        num_documents: docs.len(),
        k,
        thresholds,
        inference_rule: opts.rule,
        macro_f1_convention: String::from(opts.macro_mode.describe()),
        child,
        parent,
        frequency_groups,
    })
}

impl MetricsReport {
    /// Fixed-width table in percent: AUC macro/micro, F1 macro/micro, P@k.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<8}{:>16}{:>16}{:>10}", "", "AUC", "F1", "Precision");
        let _ = writeln!(
            out,
            "{:<8}{:>8}{:>8}{:>8}{:>8}{:>10}",
            "", "Macro", "Micro", "Macro", "Micro", format!("P@{}", self.k)
        );
        let mut row = |name: &str, m: &LevelMetrics| {
            let _ = writeln!(
                out,
                "{:<8}{:>8.2}{:>8.2}{:>8.2}{:>8.2}{:>10.2}",
                name,
                100.0 * m.macro_auc,
                100.0 * m.micro_auc,
                100.0 * m.macro_f1,
                100.0 * m.micro_f1,
                100.0 * m.precision_at_k
            );
        };
        row("child", &self.child);
        if let Some(p) = &self.parent {
            row("parent", p);
        }
        if let Some(groups) = &self.frequency_groups {
            let _ = writeln!(out, "micro-F1 by training frequency");
            for g in groups {
                let _ = writeln!(
                    out,
                    "{:<8}{:>8.2}  ({} labels)",
                    g.group.label(),
                    100.0 * g.micro_f1,
                    g.num_labels
                );
            }
        }
        out
    }
}
