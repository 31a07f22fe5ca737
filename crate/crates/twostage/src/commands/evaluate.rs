use std::collections::BTreeSet;
use std::fs;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use twostage_core::data::encode_corpus;
use twostage_core::metrics::{evaluate as evaluate_scores, EvalOptions, FrequencyGroup, MacroMode, Thresholds};
use twostage_core::training::score_documents;

use super::{create_out_dir, read_config, Progress};
use crate::checkpoint::Checkpoint;
use crate::cli::{EvaluateArgs, MacroModeArg};
use crate::corpus::load_corpus;
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

pub const REPORT_FILE: &str = "report.json";

/// Evaluation settings; unset thresholds come from the checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k: usize,
    pub parent_threshold: Option<f64>,
    pub child_threshold: Option<f64>,
    pub parents: bool,
    pub groups: bool,
    pub macro_mode: MacroMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 8,
            parent_threshold: None,
            child_threshold: None,
            parents: false,
            groups: false,
            macro_mode: MacroMode::ActiveLabels,
        }
    }
}

pub(super) fn resolve_thresholds(base: Thresholds, parent: Option<f64>, child: Option<f64>) -> CliResult<Thresholds> {
    Thresholds::new(parent.unwrap_or(base.parent), child.unwrap_or(base.child))
        .map_err(|e| CliError::Usage(e.to_string()))
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let start = Instant::now();
    let progress = Progress { quiet: args.common.quiet };
    let mut cfg = match &args.common.config {
        Some(path) => read_config::<EvalConfig>(path)?.1,
        None => EvalConfig::default(),
    };
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if args.parent_threshold.is_some() {
        cfg.parent_threshold = args.parent_threshold;
    }
    if args.child_threshold.is_some() {
        cfg.child_threshold = args.child_threshold;
    }
    cfg.parents |= args.parents;
    cfg.groups |= args.groups;
    if let Some(m) = args.macro_mode {
        cfg.macro_mode = match m {
            MacroModeArg::Active => MacroMode::ActiveLabels,
            MacroModeArg::All => MacroMode::AllLabels,
        };
    }

    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let h = &ckpt.hierarchy;
    if cfg.k == 0 || cfg.k > h.num_children() {
        return Err(CliError::Usage(format!(
            "--k must lie in 1..={} (the number of child codes), got {}",
            h.num_children(),
            cfg.k
        )));
    }
    let thresholds = resolve_thresholds(ckpt.thresholds, cfg.parent_threshold, cfg.child_threshold)?;

    let raw = load_corpus(&args.split)?;
    if raw.is_empty() {
        return Err(CliError::Usage(format!("{} has no documents", args.split.display())));
    }
    let split_codes: BTreeSet<&str> = raw.iter().flat_map(|d| d.labels.iter().map(|l| l.trim())).collect();
    let known = split_codes.iter().filter(|c| h.child_position(c).is_some()).count();
    if !split_codes.is_empty() && known == 0 {
        return Err(CliError::Incompatible(format!(
            "label universe mismatch: the split uses {} distinct codes and none of them is among the checkpoint's {} child codes",
            split_codes.len(),
            h.num_children()
        )));
    }
    if known < split_codes.len() {
        progress.say(format!(
            "{} of {} distinct split codes are outside the checkpoint universe and count as misses",
            split_codes.len() - known,
            split_codes.len()
        ));
    }
    let docs = encode_corpus(&raw, &ckpt.vocab, h, ckpt.config.max_sequence_length)?;
    let scores = score_documents(&ckpt.params, &docs, &ckpt.config.forward_options())?;
    let opts = EvalOptions {
        rule: ckpt.config.inference_rule(),
        macro_mode: cfg.macro_mode,
        parents: cfg.parents,
        groups: cfg
            .groups
            .then(|| ckpt.train_label_frequencies.iter().map(|&n| FrequencyGroup::from_count(n)).collect()),
    };
    let report = evaluate_scores(&scores, &docs, h, thresholds, cfg.k, &opts)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";

    let out = &args.common.out;
    create_out_dir(out)?;
    let report_path = out.join(REPORT_FILE);
    fs::write(&report_path, &json).map_err(|e| CliError::io(&report_path, e))?;
    if args.table {
        print!("{}", report.table());
    } else {
        print!("{json}");
    }

    let mut manifest = RunManifest::new("evaluate", &cfg, args.common.seed.unwrap_or(ckpt.config.seed));
    if let Some(path) = &args.common.config {
        manifest.add_input(path)?;
    }
    manifest.add_input(&args.checkpoint)?;
    manifest.add_input(&args.split)?;
    manifest.add_output(&report_path)?;
    manifest.timings.insert("total_seconds".into(), start.elapsed().as_secs_f64());
    manifest.write(out)
}
