use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hierarchy::LabelHierarchy;
use crate::metrics::{InferenceRule, Thresholds};
use crate::model::PredictionScores;

/// Grid `{1/n, 2/n, …, (n-1)/n}` with `n = 1/step`.
pub fn threshold_grid(step: f64) -> Result<Vec<f64>> {
    let n = if step > 0.0 { (1.0 / step + 0.5) as usize } else { 0 };
    if n < 2 || ((n as f64) * step - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(alloc::format!(
            "threshold step must divide 1 into at least two parts, got {step}"
        )));
    }
    Ok((1..n).map(|i| i as f64 / n as f64).collect())
}

/// `2tp / (2tp + fp + fn)` kept as an exact fraction.
#[derive(Clone, Copy, Debug)]
struct F1Fraction {
    num: u64,
    den: u64,
}

impl F1Fraction {
    fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        F1Fraction {
            num: 2 * tp,
            den: 2 * tp + fp + fn_,
        }
    }

    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        // 0/0 counts as 0
        let lhs = self.num as u128 * other.den.max(1) as u128;
        let rhs = other.num as u128 * self.den.max(1) as u128;
        lhs.cmp(&rhs)
    }
}

/// Grid search for the pair maximizing child micro-F1 under the joint rule.
/// Ties go to (0.5, 0.5), then to the lexicographically smaller pair.
pub fn tune_thresholds(
    scores: &[PredictionScores],
    gold: &[BTreeSet<usize>],
    h: &LabelHierarchy,
    step: f64,
) -> Result<Thresholds> {
    tune_thresholds_with(scores, gold, h, step, 0, InferenceRule::Joint)
}

/// As [`tune_thresholds`], with `extra_misses` false negatives that no
/// threshold can recover. Under [`InferenceRule::ChildOnly`] only the child
/// threshold is searched and the parent threshold stays at 0.5.
pub fn tune_thresholds_with(
    scores: &[PredictionScores],
    gold: &[BTreeSet<usize>],
    h: &LabelHierarchy,
    step: f64,
    extra_misses: u64,
    rule: InferenceRule,
) -> Result<Thresholds> {
    if scores.is_empty() {
        return Err(Error::invalid("threshold tuning needs a non-empty dev set"));
    }
    if scores.len() != gold.len() {
        return Err(Error::ShapeMismatch {
            op: "tune_thresholds",
            left: alloc::vec![scores.len()],
            right: alloc::vec![gold.len()],
        });
    }
    let grid = threshold_grid(step)?;
    let parent_grid = match rule {
        InferenceRule::Joint => grid.clone(),
        InferenceRule::ChildOnly => alloc::vec![0.5],
    };
    let total_gold: u64 = gold.iter().map(|g| g.len() as u64).sum::<u64>() + extra_misses;

    let mut best: Option<(F1Fraction, f64, f64)> = None;
    let mut at_half = None;
    for &tp_thr in &parent_grid {
        // child scores whose parent passes, split by gold membership
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (s, g) in scores.iter().zip(gold) {
            for (c, &p) in s.child_probs.iter().enumerate() {
                if rule == InferenceRule::ChildOnly || s.parent_probs[h.parent_index_of(c)] > tp_thr {
                    if g.contains(&c) {
                        pos.push(p);
                    } else {
                        neg.push(p);
                    }
                }
            }
        }
        pos.sort_by(f64::total_cmp);
        neg.sort_by(f64::total_cmp);
        let above = |v: &[f64], t: f64| (v.len() - v.partition_point(|&x| x <= t)) as u64;
        for &tc_thr in &grid {
            let tp = above(&pos, tc_thr);
            let fp = above(&neg, tc_thr);
            let f = F1Fraction::new(tp, fp, total_gold - tp);
            if tp_thr == 0.5 && tc_thr == 0.5 {
                at_half = Some(f);
            }
            if best.is_none_or(|(b, _, _)| f.cmp(&b).is_gt()) {
                best = Some((f, tp_thr, tc_thr));
            }
        }
    }
    let (best_f, p, c) = best.expect("grid is non-empty");
    if let Some(f) = at_half {
        if f.cmp(&best_f).is_eq() {
            return Thresholds::new(0.5, 0.5);
        }
    }
    Thresholds::new(p, c)
}
