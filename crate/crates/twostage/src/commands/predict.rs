use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use twostage_core::data::encode_document;
use twostage_core::metrics::predict_labels_with;
use twostage_core::model::forward;

use super::evaluate::resolve_thresholds;
use super::{create_out_dir, read_config, Progress};
use crate::checkpoint::Checkpoint;
use crate::cli::PredictArgs;
use crate::corpus::load_corpus;
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

pub const PREDICTIONS_FILE: &str = "predictions.jsonl";

/// One output line per input document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    /// Predicted child codes, sorted.
    pub codes: Vec<String>,
    /// Probability of each predicted child code.
    pub child_probs: BTreeMap<String, f64>,
    /// Probability of each parent of a predicted code.
    pub parent_probs: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PredictConfig {
    parent_threshold: Option<f64>,
    child_threshold: Option<f64>,
}

pub fn predict(args: &PredictArgs) -> CliResult<()> {
    let start = Instant::now();
    let progress = Progress { quiet: args.common.quiet };
    let mut cfg = match &args.common.config {
        Some(path) => read_config::<PredictConfig>(path)?.1,
        None => PredictConfig::default(),
    };
    if args.parent_threshold.is_some() {
        cfg.parent_threshold = args.parent_threshold;
    }
    if args.child_threshold.is_some() {
        cfg.child_threshold = args.child_threshold;
    }
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let thresholds = resolve_thresholds(ckpt.thresholds, cfg.parent_threshold, cfg.child_threshold)?;
    let raw = load_corpus(&args.input)?;
    let h = &ckpt.hierarchy;
    let opts = ckpt.config.forward_options();
    let rule = ckpt.config.inference_rule();

    let out = &args.common.out;
    create_out_dir(out)?;
    let path = out.join(PREDICTIONS_FILE);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut writer = BufWriter::new(file);
    for doc in &raw {
        let encoded = encode_document(doc, &ckpt.vocab, h, ckpt.config.max_sequence_length)?;
        let scores = forward(&ckpt.params, &encoded.token_ids, &opts)?;
        let predicted = predict_labels_with(&scores, h, thresholds, rule);
        let mut record = Prediction {
            id: doc.id.clone(),
            codes: predicted.iter().map(|&c| h.child_code(c).to_string()).collect(),
            child_probs: BTreeMap::new(),
            parent_probs: BTreeMap::new(),
        };
        record.codes.sort();
        for &c in &predicted {
            record.child_probs.insert(h.child_code(c).to_string(), scores.child_probs[c]);
            let p = h.parent_index_of(c);
            record.parent_probs.insert(h.parent_code(p).to_string(), scores.parent_probs[p]);
        }
        let line = serde_json::to_string(&record).expect("prediction serializes");
        writeln!(writer, "{line}").map_err(|e| CliError::io(&path, e))?;
    }
    writer.flush().map_err(|e| CliError::io(&path, e))?;
    drop(writer);
    progress.say(format!("wrote {} predictions to {}", raw.len(), path.display()));

    let mut manifest = RunManifest::new("predict", &cfg, args.common.seed.unwrap_or(ckpt.config.seed));
    if let Some(p) = &args.common.config {
        manifest.add_input(p)?;
    }
    manifest.add_input(&args.checkpoint)?;
    manifest.add_input(&args.input)?;
    manifest.add_output(&path)?;
    manifest.timings.insert("total_seconds".into(), start.elapsed().as_secs_f64());
    manifest.write(out)
}
