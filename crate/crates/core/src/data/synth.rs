//! Synthetic hierarchical corpora with power-law label frequencies.
//!
//! Every child and parent code owns a few signature tokens. A document
//! contains all signature tokens of its child codes, most signature tokens of
//! their parents, and background tokens drawn from a Zipf distribution.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use super::document::RawDocument;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub num_documents: usize,
    pub num_parents: usize,
    pub children_per_parent: usize,
    pub vocab_size: usize,
    pub mean_doc_length: f64,
    pub labels_per_doc_mean: f64,
    /// Exponent `s` of the `1 / rank^s` child label weights; 0 is uniform.
    pub frequency_skew: f64,
    pub seed: u64,
    #[serde(default = "default_signature_tokens")]
    pub signature_tokens: usize,
    #[serde(default = "default_parent_signature_tokens")]
    pub parent_signature_tokens: usize,
    /// Probability that each parent signature token is emitted.
    #[serde(default = "default_parent_signature_rate")]
    pub parent_signature_rate: f64,
    /// Mean number of non-gold children per document, drawn from other
    /// parents, whose signature tokens are inserted without the label.
    #[serde(default)]
    pub distractor_labels_mean: f64,
    #[serde(default = "default_split_fraction")]
    pub dev_fraction: f64,
    #[serde(default = "default_split_fraction")]
    pub test_fraction: f64,
}

fn default_signature_tokens() -> usize {
    3
}
fn default_parent_signature_tokens() -> usize {
    2
}
fn default_parent_signature_rate() -> f64 {
    0.9
}
fn default_split_fraction() -> f64 {
    0.15
}

impl SynthConfig {
    /// A config with the optional fields at their defaults.
    pub fn new(
        num_documents: usize,
        num_parents: usize,
        children_per_parent: usize,
        vocab_size: usize,
        seed: u64,
    ) -> Self {
        SynthConfig {
            num_documents,
            num_parents,
            children_per_parent,
            vocab_size,
            mean_doc_length: 40.0,
            labels_per_doc_mean: 3.0,
            frequency_skew: 1.0,
            seed,
            signature_tokens: default_signature_tokens(),
            parent_signature_tokens: default_parent_signature_tokens(),
            parent_signature_rate: default_parent_signature_rate(),
            distractor_labels_mean: 0.0,
            dev_fraction: default_split_fraction(),
            test_fraction: default_split_fraction(),
        }
    }

    pub fn num_children(&self) -> usize {
        self.num_parents * self.children_per_parent
    }

    fn signature_budget(&self) -> usize {
        self.num_children() * self.signature_tokens + self.num_parents * self.parent_signature_tokens
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_documents", self.num_documents),
            ("num_parents", self.num_parents),
            ("children_per_parent", self.children_per_parent),
            ("vocab_size", self.vocab_size),
            ("signature_tokens", self.signature_tokens),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        if !(self.frequency_skew >= 0.0 && self.frequency_skew.is_finite()) {
            return Err(Error::invalid("frequency_skew must be a finite value >= 0"));
        }
        if !(self.mean_doc_length > 0.0 && self.mean_doc_length.is_finite()) {
            return Err(Error::invalid("mean_doc_length must be positive"));
        }
        if !(self.labels_per_doc_mean >= 1.0 && self.labels_per_doc_mean.is_finite()) {
            return Err(Error::invalid("labels_per_doc_mean must be at least 1"));
        }
        if !(self.distractor_labels_mean >= 0.0 && self.distractor_labels_mean.is_finite()) {
            return Err(Error::invalid("distractor_labels_mean must be a finite value >= 0"));
        }
        if !(0.0..=1.0).contains(&self.parent_signature_rate) {
            return Err(Error::invalid("parent_signature_rate must lie in [0, 1]"));
        }
        let fractions_ok = self.dev_fraction >= 0.0
            && self.test_fraction >= 0.0
            && self.dev_fraction + self.test_fraction < 1.0;
        if !fractions_ok {
            return Err(Error::invalid("dev_fraction + test_fraction must lie in [0, 1)"));
        }
        if self.signature_budget() >= self.vocab_size {
            return Err(Error::invalid(format!(
                "signature tokens need {} words but vocab_size is {}; at least one background word is required",
                self.signature_budget(),
                self.vocab_size
            )));
        }
        if self.vocab_size > WORD_SPACE {
            return Err(Error::invalid(format!("vocab_size exceeds {WORD_SPACE}")));
        }
        Ok(())
    }
}

/// Generation record written next to the corpus files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub config: SynthConfig,
    pub child_codes: Vec<String>,
    pub parent_codes: Vec<String>,
    /// Number of train documents carrying each child code.
    pub train_label_frequencies: BTreeMap<String, usize>,
    pub child_signatures: BTreeMap<String, Vec<String>>,
    pub parent_signatures: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub train: Vec<RawDocument>,
    pub dev: Vec<RawDocument>,
    pub test: Vec<RawDocument>,
    pub manifest: SynthManifest,
}

const CONSONANTS: &[u8] = b"bcdfghklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const SYLLABLES: usize = 16 * 5;
const WORD_SPACE: usize = SYLLABLES * SYLLABLES * SYLLABLES;

/// Distinct three-syllable pseudo-word for every `i < WORD_SPACE`.
fn pseudo_word(mut i: usize) -> String {
    let mut w = String::with_capacity(6);
    for _ in 0..3 {
        let s = i % SYLLABLES;
        i /= SYLLABLES;
        w.push(CONSONANTS[s / 5] as char);
        w.push(VOWELS[s % 5] as char);
    }
    w
}

fn digits(mut n: usize) -> usize {
    let mut d = 1;
    while n >= 10 {
        n /= 10;
        d += 1;
    }
    d
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_children = cfg.num_children();

    let parent_width = digits(cfg.num_parents + 99).max(3);
    let child_width = digits(cfg.children_per_parent - 1);
    let parent_codes: Vec<String> = (0..cfg.num_parents)
        .map(|p| format!("{:0parent_width$}", 100 + p))
        .collect();
    // child i belongs to parent i / children_per_parent
    let child_codes: Vec<String> = (0..n_children)
        .map(|c| {
            let p = c / cfg.children_per_parent;
            format!("{}.{:0child_width$}", parent_codes[p], c % cfg.children_per_parent)
        })
        .collect();

    let mut words: Vec<String> = (0..cfg.vocab_size).map(pseudo_word).collect();
    words.shuffle(&mut rng);
    let mut cursor = 0;
    let mut take = |n: usize| {
        let out: Vec<String> = words[cursor..cursor + n].to_vec();
        cursor += n;
        out
    };
    let child_sigs: Vec<Vec<String>> = (0..n_children).map(|_| take(cfg.signature_tokens)).collect();
    let parent_sigs: Vec<Vec<String>> = (0..cfg.num_parents)
        .map(|_| take(cfg.parent_signature_tokens))
        .collect();
    let background = take(cfg.vocab_size - cfg.signature_budget());
    let background_dist = WeightedIndex::new((0..background.len()).map(|r| 1.0 / (r + 1) as f64))
        .map_err(|e| Error::invalid(format!("background distribution: {e}")))?;

    let mut ranks: Vec<usize> = (0..n_children).collect();
    ranks.shuffle(&mut rng);
    let weights: Vec<f64> = ranks
        .iter()
        .map(|&r| Float::powf((r + 1) as f64, -cfg.frequency_skew))
        .collect();
    let extra_labels = Poisson::new(cfg.labels_per_doc_mean - 1.0).ok();
    let distractors = Poisson::new(cfg.distractor_labels_mean).ok();
    let doc_length = Poisson::new(cfg.mean_doc_length)
        .map_err(|e| Error::invalid(format!("mean_doc_length: {e}")))?;

    let mut docs = Vec::with_capacity(cfg.num_documents);
    for d in 0..cfg.num_documents {
        let extra = extra_labels.map_or(0, |p| p.sample(&mut rng) as usize);
        let k = (1 + extra).min(n_children);
        let labels = weighted_sample_without_replacement(&weights, k, &mut rng);

        let mut tokens: Vec<&str> = Vec::new();
        let mut parents = BTreeSet::new();
        for &c in &labels {
            tokens.extend(child_sigs[c].iter().map(String::as_str));
            parents.insert(c / cfg.children_per_parent);
        }
        for &p in &parents {
            for t in &parent_sigs[p] {
                if rng.gen_bool(cfg.parent_signature_rate) {
                    tokens.push(t);
                }
            }
        }
        if let Some(dist) = distractors {
            let wanted = dist.sample(&mut rng) as usize;
            let eligible: Vec<usize> = (0..n_children)
                .filter(|c| !parents.contains(&(c / cfg.children_per_parent)))
                .collect();
            if !eligible.is_empty() {
                for _ in 0..wanted {
                    let c = eligible[rng.gen_range(0..eligible.len())];
                    tokens.extend(child_sigs[c].iter().map(String::as_str));
                }
            }
        }
        let target = (doc_length.sample(&mut rng) as usize).max(tokens.len() + 1);
        while tokens.len() < target {
            tokens.push(&background[background_dist.sample(&mut rng)]);
        }
        tokens.shuffle(&mut rng);

        let mut codes: Vec<String> = labels.iter().map(|&c| child_codes[c].clone()).collect();
        codes.sort();
        docs.push(RawDocument {
            id: format!("doc{d:06}"),
            text: tokens.join(" "),
            labels: codes,
        });
    }

    let n = cfg.num_documents;
    let n_test = (cfg.test_fraction * n as f64).round() as usize;
    let n_dev = ((cfg.dev_fraction * n as f64).round() as usize).min(n - n_test);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut split = alloc::vec![0u8; n];
    for &i in &order[..n_test] {
        split[i] = 2;
    }
    for &i in &order[n_test..n_test + n_dev] {
        split[i] = 1;
    }
    let mut corpus = SynthCorpus {
        train: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
        manifest: SynthManifest {
            config: cfg.clone(),
            train_label_frequencies: child_codes.iter().map(|c| (c.clone(), 0)).collect(),
            child_signatures: child_codes.iter().cloned().zip(child_sigs).collect(),
            parent_signatures: parent_codes.iter().cloned().zip(parent_sigs).collect(),
            child_codes,
            parent_codes,
        },
    };
    for (doc, s) in docs.into_iter().zip(split) {
        match s {
            0 => {
                for code in &doc.labels {
                    *corpus
                        .manifest
                        .train_label_frequencies
                        .get_mut(code)
                        .expect("generated code") += 1;
                }
                corpus.train.push(doc);
            }
            1 => corpus.dev.push(doc),
            _ => corpus.test.push(doc),
        }
    }
    Ok(corpus)
}

/// Draws `k` distinct indices with probability proportional to `weights`
/// using exponential keys: the `k` largest `ln(u) / w` win.
fn weighted_sample_without_replacement<R: Rng>(weights: &[f64], k: usize, rng: &mut R) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            (Float::ln(u) / w, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.truncate(k);
    keyed.into_iter().map(|(_, i)| i).collect()
}
