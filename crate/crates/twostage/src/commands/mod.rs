mod evaluate;
mod predict;
mod synth;
mod train;

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{CliError, CliResult};

pub use evaluate::{evaluate, EvalConfig};
pub use predict::{predict, Prediction};
pub use synth::{default_synth_config, synth};
pub use train::{train, MODEL_FILE};

/// Reads a JSON config file, returning its verbatim text and parsed value.
fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<(String, T)> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    let value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config file {}: {e}", path.display())))?;
    Ok((text, value))
}

fn create_out_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

struct Progress {
    quiet: bool,
}

impl Progress {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}
