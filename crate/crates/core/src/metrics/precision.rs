use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::f1::check_aligned;
use crate::error::{Error, Result};

/// Indices of the `k` highest scores, ties broken by ascending index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Mean over documents of the gold fraction among each document's top `k`.
pub fn precision_at_k(scores: &[Vec<f64>], gold: &[BTreeSet<usize>], k: usize) -> Result<f64> {
    check_aligned(scores.len(), gold.len())?;
    let num_labels = scores.first().map_or(0, Vec::len);
    if k == 0 || k > num_labels {
        return Err(Error::invalid(alloc::format!(
            "k must lie in 1..={num_labels}, got {k}"
        )));
    }
    if scores.is_empty() {
        return Err(Error::invalid("precision@k over no documents"));
    }
    let mut total = 0.0;
    for (row, g) in scores.iter().zip(gold) {
        check_aligned(row.len(), num_labels)?;
        let hits = top_k(row, k).iter().filter(|l| g.contains(l)).count();
        total += hits as f64 / k as f64;
    }
    Ok(total / scores.len() as f64)
}
