//! Training log: a header line, then one JSON record per epoch.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twostage_core::training::{EpochRecord, TrainingConfig};

use crate::error::{CliError, CliResult};

pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    /// The config file exactly as read, if one was given.
    pub config_file: Option<String>,
    pub config: TrainingConfig,
    pub num_train_documents: usize,
    pub num_dev_documents: usize,
    pub vocab_size: usize,
    pub num_parents: usize,
    pub num_children: usize,
}

pub struct TrainLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl TrainLog {
    pub fn create(path: &Path, header: &LogHeader) -> CliResult<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut log = TrainLog {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        log.line(&serde_json::json!({ "header": header }))?;
        Ok(log)
    }

    fn line<S: Serialize>(&mut self, value: &S) -> CliResult<()> {
        let text = serde_json::to_string(value).expect("log record serializes");
        writeln!(self.out, "{text}")
            .and_then(|_| self.out.flush())
            .map_err(|e| CliError::io(&self.path, e))
    }

    pub fn record(&mut self, record: &EpochRecord) -> CliResult<()> {
        self.line(record)
    }
}

#[derive(Deserialize)]
struct HeaderLine {
    header: LogHeader,
}

/// Parses a log written by [`TrainLog`].
pub fn read_log(path: &Path) -> CliResult<(LogHeader, Vec<EpochRecord>)> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let bad = |what: String| CliError::Usage(format!("{}: {what}", path.display()));
    let first = lines
        .next()
        .ok_or_else(|| bad("empty training log".into()))?
        .map_err(|e| CliError::io(path, e))?;
    let header: HeaderLine = serde_json::from_str(&first).map_err(|e| bad(format!("header: {e}")))?;
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        records.push(serde_json::from_str(&line).map_err(|e| bad(format!("line {}: {e}", i + 2)))?);
    }
    Ok((header.header, records))
}
