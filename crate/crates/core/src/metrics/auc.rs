use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::f1::check_aligned;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucScores {
    pub macro_auc: f64,
    pub micro_auc: f64,
}

/// Twice the Mann–Whitney U statistic together with the pair count. Tied
/// positive/negative pairs count one half, hence the doubling.
fn doubled_u(mut scored: Vec<(f64, bool)>) -> (u128, u128) {
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut negatives_below: u128 = 0;
    let mut positives: u128 = 0;
    let mut u2: u128 = 0;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < scored.len() && scored[j].0 == scored[i].0 {
            if scored[j].1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        u2 += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        positives += pos;
        i = j;
    }
    (u2, 2 * positives * negatives_below)
}

/// Probability that a random positive outranks a random negative, or `None`
/// when either class is empty.
pub fn binary_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let (u2, pairs2) = doubled_u(scores.iter().copied().zip(labels.iter().copied()).collect());
    (pairs2 > 0).then(|| u2 as f64 / pairs2 as f64)
}

/// Macro AUC averages labels that have both a positive and a negative
/// document; micro AUC ranks all (document, label) pairs together.
pub fn auc_scores(scores: &[Vec<f64>], gold: &[BTreeSet<usize>]) -> Result<AucScores> {
    check_aligned(scores.len(), gold.len())?;
    let num_labels = scores.first().map_or(0, Vec::len);
    for row in scores {
        check_aligned(row.len(), num_labels)?;
    }
    let mut sum = 0.0;
    let mut valid = 0usize;
    for l in 0..num_labels {
        let column = scores
            .iter()
            .zip(gold)
            .map(|(row, g)| (row[l], g.contains(&l)))
            .collect();
        let (u2, pairs2) = doubled_u(column);
        if pairs2 > 0 {
            sum += u2 as f64 / pairs2 as f64;
            valid += 1;
        }
    }
    if valid == 0 {
        return Err(Error::invalid("macro AUC: no label has both positive and negative documents"));
    }
    let flat = scores
        .iter()
        .zip(gold)
        .flat_map(|(row, g)| row.iter().enumerate().map(move |(l, &s)| (s, g.contains(&l))))
        .collect();
    let (u2, pairs2) = doubled_u(flat);
    if pairs2 == 0 {
        return Err(Error::invalid("micro AUC: need at least one positive and one negative pair"));
    }
    Ok(AucScores {
        macro_auc: sum / valid as f64,
        micro_auc: u2 as f64 / pairs2 as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn perfect_ranking() {
        let scores = vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.3, 0.05]];
        let gold: Vec<BTreeSet<usize>> = vec![[0].into(), [1].into(), BTreeSet::new()];
        let a = auc_scores(&scores, &gold).unwrap();
        assert_eq!((a.macro_auc, a.micro_auc), (1.0, 1.0));
    }

    #[test]
    fn ties_count_half() {
        let scores = vec![vec![0.5, 0.5]; 4];
        let gold: Vec<BTreeSet<usize>> = vec![[0].into(), [1].into(), [0, 1].into(), BTreeSet::new()];
        let a = auc_scores(&scores, &gold).unwrap();
        assert_eq!((a.macro_auc, a.micro_auc), (0.5, 0.5));
        assert_eq!(binary_auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]), Some(0.75));
    }

    #[test]
    fn degenerate_inputs() {
        let scores = vec![vec![0.1], vec![0.2]];
        let all_pos: Vec<BTreeSet<usize>> = vec![[0].into(), [0].into()];
        assert!(auc_scores(&scores, &all_pos).is_err());
        assert_eq!(binary_auc(&[0.3], &[true]), None);
    }
}
