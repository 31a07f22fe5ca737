use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::document::Document;
use super::vocab::PAD_ID;
use crate::error::{Error, Result};

/// A group of documents padded with trailing [`PAD_ID`] to the longest member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    /// Positions of the member documents in the input slice.
    pub indices: Vec<usize>,
    pub token_ids: Vec<Vec<u32>>,
    /// `true` for real tokens; always a prefix of each row.
    pub mask: Vec<Vec<bool>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn width(&self) -> usize {
        self.token_ids.first().map_or(0, Vec::len)
    }
}

/// Splits `docs` into batches of `batch_size`, shuffling first when a seed is
/// given. The last batch may be smaller.
pub fn make_batches(docs: &[Document], batch_size: usize, shuffle_seed: Option<u64>) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch_size must be at least 1"));
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(order
        .chunks(batch_size)
        .map(|chunk| {
            let width = chunk.iter().map(|&i| docs[i].len()).max().unwrap_or(0);
            let mut token_ids = Vec::with_capacity(chunk.len());
            let mut mask = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let ids = &docs[i].token_ids;
                let mut row = ids.clone();
                row.resize(width, PAD_ID);
                let mut m = vec![true; ids.len()];
                m.resize(width, false);
                token_ids.push(row);
                mask.push(m);
            }
            Batch {
                indices: chunk.to_vec(),
                token_ids,
                mask,
            }
        })
        .collect())
}
