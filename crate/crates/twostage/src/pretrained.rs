//! Word vectors in the whitespace text format `token v1 v2 … v_d`, one
//! token per line.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use twostage_core::data::{Vocabulary, PAD_ID};
use twostage_core::Tensor;

use crate::error::{CliError, CliResult};

/// Overwrites the rows of `table` whose token appears in the file and
/// returns how many rows were set. Lines with a single integer pair (the
/// word2vec count header) are skipped.
pub fn apply_pretrained(path: &Path, vocab: &Vocabulary, table: &mut Tensor<f32>) -> CliResult<usize> {
    let dim = table.shape()[1];
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut loaded = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        if i == 0 && values.len() == 1 {
            continue;
        }
        if values.len() != dim {
            return Err(CliError::Usage(format!(
                "{}:{}: expected {dim} values for embed_dim, found {}",
                path.display(),
                i + 1,
                values.len()
            )));
        }
        let id = vocab.id(token);
        if vocab.token(id) != Some(token) || id == PAD_ID {
            continue;
        }
        let row: Vec<f32> = values
            .iter()
            .map(|v| v.parse::<f32>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        let start = id as usize * dim;
        table.data_mut()[start..start + dim].copy_from_slice(&row);
        loaded += 1;
    }
    Ok(loaded)
}
