use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::vocab::{tokenize, Vocabulary, UNK_ID};
use crate::error::{Error, Result};
use crate::hierarchy::{parent_of, LabelHierarchy};

/// One corpus record as stored on disk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDocument {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub labels: Vec<String>,
}

/// A document mapped onto a vocabulary and a frozen label universe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub token_ids: Vec<u32>,
    pub gold_children: BTreeSet<usize>,
    pub gold_parents: BTreeSet<usize>,
    /// Gold codes outside the label universe, sorted and deduplicated.
    pub unrecoverable: Vec<String>,
}

impl Document {
    /// Gold parents for evaluation: the derived parents plus known parents of
    /// unrecoverable children.
    pub fn eval_parents(&self, h: &LabelHierarchy) -> BTreeSet<usize> {
        let mut parents = self.gold_parents.clone();
        for code in &self.unrecoverable {
            if let Some(p) = parent_of(code).ok().and_then(|p| h.parent_position(p)) {
                parents.insert(p);
            }
        }
        parents
    }

    /// Distinct parent codes of unrecoverable children that are themselves
    /// outside the parent universe.
    pub fn unrecoverable_parents(&self, h: &LabelHierarchy) -> Vec<String> {
        let set: BTreeSet<String> = self
            .unrecoverable
            .iter()
            .filter_map(|c| parent_of(c).ok())
            .filter(|p| h.parent_position(p).is_none())
            .map(str::to_string)
            .collect();
        set.into_iter().collect()
    }

    /// All gold codes, in-universe and unrecoverable, sorted.
    pub fn label_codes(&self, h: &LabelHierarchy) -> Vec<String> {
        let mut codes: Vec<String> = self
            .gold_children
            .iter()
            .map(|&c| h.child_code(c).to_string())
            .chain(self.unrecoverable.iter().cloned())
            .collect();
        codes.sort();
        codes
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

/// Tokenizes, maps to ids (unknown → 1), keeps the first `max_len` tokens and
/// maps labels through the hierarchy.
pub fn encode_document(
    raw: &RawDocument,
    vocab: &Vocabulary,
    h: &LabelHierarchy,
    max_len: usize,
) -> Result<Document> {
    if max_len == 0 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    let mut token_ids: Vec<u32> = tokenize(&raw.text)
        .iter()
        .take(max_len)
        .map(|t| vocab.id(t))
        .collect();
    // attention needs at least one position
    if token_ids.is_empty() {
        token_ids.push(UNK_ID);
    }
    let mut gold_children = BTreeSet::new();
    let mut unrecoverable = BTreeSet::new();
    for label in &raw.labels {
        let label = label.trim();
        parent_of(label)?;
        match h.child_position(label) {
            Some(c) => {
                gold_children.insert(c);
            }
            None => {
                unrecoverable.insert(label.to_string());
            }
        }
    }
    let gold_parents = h.derive_parent_set(&gold_children)?;
    Ok(Document {
        id: raw.id.clone(),
        token_ids,
        gold_children,
        gold_parents,
        unrecoverable: unrecoverable.into_iter().collect(),
    })
}

pub fn encode_corpus(
    raws: &[RawDocument],
    vocab: &Vocabulary,
    h: &LabelHierarchy,
    max_len: usize,
) -> Result<Vec<Document>> {
    raws.iter()
        .map(|r| encode_document(r, vocab, h, max_len))
        .collect()
}
