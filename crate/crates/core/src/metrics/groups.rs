use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::f1::{check_aligned, per_label_confusion, Confusion};
use crate::data::Document;
use crate::error::Result;

/// Buckets of labels by training-set document frequency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FrequencyGroup {
    #[serde(rename = "1-10")]
    UpTo10,
    #[serde(rename = "11-50")]
    UpTo50,
    #[serde(rename = "51-100")]
    UpTo100,
    #[serde(rename = "101-500")]
    UpTo500,
    #[serde(rename = ">500")]
    Over500,
    /// Never seen in training; not one of the five reported buckets.
    #[serde(rename = "unseen")]
    Unseen,
}

impl FrequencyGroup {
    pub const REPORTED: [FrequencyGroup; 5] = [
        FrequencyGroup::UpTo10,
        FrequencyGroup::UpTo50,
        FrequencyGroup::UpTo100,
        FrequencyGroup::UpTo500,
        FrequencyGroup::Over500,
    ];

    pub fn from_count(n: usize) -> Self {
        match n {
            0 => FrequencyGroup::Unseen,
            1..=10 => FrequencyGroup::UpTo10,
            11..=50 => FrequencyGroup::UpTo50,
            51..=100 => FrequencyGroup::UpTo100,
            101..=500 => FrequencyGroup::UpTo500,
            _ => FrequencyGroup::Over500,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FrequencyGroup::UpTo10 => "1-10",
            FrequencyGroup::UpTo50 => "11-50",
            FrequencyGroup::UpTo100 => "51-100",
            FrequencyGroup::UpTo500 => "101-500",
            FrequencyGroup::Over500 => ">500",
            FrequencyGroup::Unseen => "unseen",
        }
    }
}

/// Number of training documents carrying each child label.
pub fn label_frequencies(train: &[Document], num_children: usize) -> Vec<usize> {
    let mut counts = vec![0; num_children];
    for doc in train {
        for &c in &doc.gold_children {
            counts[c] += 1;
        }
    }
    counts
}

pub fn group_by_frequency(train: &[Document], num_children: usize) -> Vec<FrequencyGroup> {
    label_frequencies(train, num_children)
        .into_iter()
        .map(FrequencyGroup::from_count)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupF1 {
    pub group: FrequencyGroup,
    pub num_labels: usize,
    pub micro_f1: f64,
}

/// Micro F1 pooled within each group. The five reported groups come first,
/// then the unseen group, which also absorbs out-of-universe gold codes.
pub fn group_micro_f1(
    pred: &[BTreeSet<usize>],
    gold: &[BTreeSet<usize>],
    groups: &[FrequencyGroup],
    misses: &[Vec<String>],
) -> Result<Vec<GroupF1>> {
    if !misses.is_empty() {
        check_aligned(misses.len(), gold.len())?;
    }
    let counts = per_label_confusion(pred, gold, groups.len())?;
    let all = FrequencyGroup::REPORTED.iter().chain([&FrequencyGroup::Unseen]);
    let distinct_misses: BTreeSet<&String> = misses.iter().flatten().collect();
    Ok(all
        .map(|&g| {
            let mut pooled = Confusion::default();
            let mut num_labels = 0;
            for (c, _) in counts.iter().zip(groups).filter(|(_, &lg)| lg == g) {
                pooled.add(c);
                num_labels += 1;
            }
            if g == FrequencyGroup::Unseen {
                pooled.fn_ += misses.iter().map(|m| m.len() as u64).sum::<u64>();
                num_labels += distinct_misses.len();
            }
            GroupF1 {
                group: g,
                num_labels,
                micro_f1: pooled.f1(),
            }
        })
        .collect())
}
