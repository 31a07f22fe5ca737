//! Corpus records, tokenization, vocabulary, document encoding, batching and
//! the synthetic corpus generator.

mod batch;
mod document;
mod synth;
mod vocab;

pub use batch::{make_batches, Batch};
pub use document::{encode_corpus, encode_document, Document, RawDocument};
pub use synth::{generate_synthetic, SynthConfig, SynthCorpus, SynthManifest};
pub use vocab::{tokenize, Vocabulary, NUM_TOKEN, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN};
