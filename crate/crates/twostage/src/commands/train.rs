use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::Instant;

use twostage_core::data::{encode_corpus, tokenize, RawDocument, SynthManifest, Vocabulary};
use twostage_core::metrics::label_frequencies;
use twostage_core::model::ModelParams;
use twostage_core::training::{train_from, EpochRecord, ThresholdPolicy, TrainObserver, TrainingConfig};
use twostage_core::LabelHierarchy;

use super::{create_out_dir, read_config, Progress};
use crate::checkpoint::Checkpoint;
use crate::cli::{ThresholdPolicyArg, TrainArgs};
use crate::corpus::{load_corpus, DEV_FILE, SYNTH_MANIFEST_FILE, TRAIN_FILE};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::pretrained::apply_pretrained;
use crate::trainlog::{LogHeader, TrainLog, TRAIN_LOG_FILE};

pub const MODEL_FILE: &str = "model.ckpt";

/// Minimum token frequency when the corpus is synthetic and nothing else
/// sets it.
const SYNTHETIC_MIN_FREQUENCY: usize = 1;

struct LogObserver {
    start: Instant,
    log: TrainLog,
    progress: Progress,
    failure: Option<CliError>,
}

impl TrainObserver for LogObserver {
    fn elapsed_seconds(&mut self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn on_epoch(&mut self, r: &EpochRecord) {
        self.progress.say(format!(
            "epoch {:>3}  loss {:.4}  dev micro-F1 {:.4}  macro-F1 {:.4}  {:.1}s",
            r.epoch, r.train_loss, r.dev_micro_f1, r.dev_macro_f1, r.wall_seconds
        ));
        if self.failure.is_none() {
            if let Err(e) = self.log.record(r) {
                self.failure = Some(e);
            }
        }
    }
}

fn read_synth_manifest(corpus: &Path) -> CliResult<Option<SynthManifest>> {
    let path = corpus.join(SYNTH_MANIFEST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid synthetic manifest {}: {e}", path.display())))?;
    Ok(Some(manifest))
}

fn label_universe(args: &TrainArgs, synth: Option<&SynthManifest>, train: &[RawDocument]) -> CliResult<Vec<String>> {
    if let Some(path) = &args.labels {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        return Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect());
    }
    if let Some(m) = synth {
        return Ok(m.child_codes.clone());
    }
    let codes: BTreeSet<&str> = train.iter().flat_map(|d| d.labels.iter().map(|l| l.trim())).collect();
    Ok(codes.into_iter().map(String::from).collect())
}

fn effective_config(args: &TrainArgs, synthetic: bool) -> CliResult<(Option<String>, TrainingConfig)> {
    let (text, mut cfg, file_sets_min_freq) = match &args.common.config {
        Some(path) => {
            let (text, cfg) = read_config::<TrainingConfig>(path)?;
            let raw: serde_json::Value = serde_json::from_str(&text).expect("parsed once already");
            let sets = raw.get("min_frequency").is_some();
            (Some(text), cfg, sets)
        }
        None => (None, TrainingConfig::default(), false),
    };
    if synthetic && !file_sets_min_freq {
        cfg.min_frequency = SYNTHETIC_MIN_FREQUENCY;
    }
    if let Some(v) = args.common.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.embed_dim {
        cfg.embed_dim = v;
    }
    if let Some(v) = args.hidden_per_direction {
        cfg.hidden_per_direction = v;
    }
    if let Some(v) = args.max_sequence_length {
        cfg.max_sequence_length = v;
    }
    if let Some(v) = args.threshold_policy {
        cfg.threshold_policy = match v {
            ThresholdPolicyArg::Fixed => ThresholdPolicy::Fixed,
            ThresholdPolicyArg::DevTuned => ThresholdPolicy::DevTuned,
        };
    }
    if let Some(v) = args.min_frequency {
        cfg.min_frequency = v;
    }
    if let Some(v) = args.dropout {
        cfg.dropout = v;
    }
    if args.detach_parent_probs {
        cfg.detach_parent_probs = true;
    }
    if args.flat {
        cfg.parent_loss_weight = 0.0;
        cfg.use_parent_attention = false;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((text, cfg))
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let start = Instant::now();
    let progress = Progress { quiet: args.common.quiet };
    let synth = read_synth_manifest(&args.corpus)?;
    let (config_text, cfg) = effective_config(args, synth.is_some())?;

    let train_path = args.corpus.join(TRAIN_FILE);
    let dev_path = args.corpus.join(DEV_FILE);
    let train_raw = load_corpus(&train_path)?;
    let dev_raw = load_corpus(&dev_path)?;
    if train_raw.is_empty() && cfg.epochs > 0 {
        return Err(CliError::Usage(format!("{} has no documents", train_path.display())));
    }
    let codes = label_universe(args, synth.as_ref(), &train_raw)?;
    if codes.is_empty() {
        return Err(CliError::Usage("the label universe is empty".into()));
    }
    let hierarchy = LabelHierarchy::build(&codes).map_err(|e| CliError::Usage(e.to_string()))?;

    let tokens: Vec<Vec<String>> = train_raw.iter().map(|d| tokenize(&d.text)).collect();
    let vocab = if tokens.is_empty() {
        Vocabulary::from_tokens(vec!["<pad>".into(), "<unk>".into()])?
    } else {
        Vocabulary::build(&tokens, cfg.min_frequency)?
    };
    let train_docs = encode_corpus(&train_raw, &vocab, &hierarchy, cfg.max_sequence_length)?;
    let dev_docs = encode_corpus(&dev_raw, &vocab, &hierarchy, cfg.max_sequence_length)?;
    let missed: usize = train_docs.iter().map(|d| d.unrecoverable.len()).sum();
    if missed > 0 {
        progress.say(format!("{missed} training labels lie outside the label universe and are ignored"));
    }
    progress.say(format!(
        "{} train / {} dev documents, vocabulary {}, {} parents, {} children",
        train_docs.len(),
        dev_docs.len(),
        vocab.len(),
        hierarchy.num_parents(),
        hierarchy.num_children()
    ));

    let mut params: ModelParams<f32> = cfg.init_params(cfg.model_dims(vocab.len(), &hierarchy))?;
    if let Some(path) = &args.pretrained {
        let n = apply_pretrained(path, &vocab, &mut params.token_embeddings)?;
        progress.say(format!("loaded {n} pretrained token vectors"));
    }

    let out = &args.common.out;
    create_out_dir(out)?;
    let log_path = out.join(TRAIN_LOG_FILE);
    let header = LogHeader {
        config_file: config_text,
        config: cfg.clone(),
        num_train_documents: train_docs.len(),
        num_dev_documents: dev_docs.len(),
        vocab_size: vocab.len(),
        num_parents: hierarchy.num_parents(),
        num_children: hierarchy.num_children(),
    };
    let mut observer = LogObserver {
        start: Instant::now(),
        log: TrainLog::create(&log_path, &header)?,
        progress,
        failure: None,
    };
    let outcome = train_from(params, &train_docs, &dev_docs, &hierarchy, &cfg, &mut observer);
    if let Some(e) = observer.failure.take() {
        return Err(e);
    }
    let outcome = outcome?;
    let train_seconds = observer.start.elapsed().as_secs_f64();

    let ckpt = Checkpoint {
        params: outcome.params,
        hierarchy,
        vocab,
        config: cfg.clone(),
        thresholds: outcome.thresholds,
        best_epoch: outcome.best_epoch,
        train_label_frequencies: label_frequencies(&train_docs, codes.len()),
    };
    let model_path = out.join(MODEL_FILE);
    ckpt.save(&model_path)?;

    let mut manifest = RunManifest::new("train", &cfg, cfg.seed);
    if let Some(path) = &args.common.config {
        manifest.add_input(path)?;
    }
    manifest.add_input(&train_path)?;
    manifest.add_input(&dev_path)?;
    for path in [&args.pretrained, &args.labels].into_iter().flatten() {
        manifest.add_input(path)?;
    }
    manifest.add_output(&model_path)?;
    manifest.add_output(&log_path)?;
    manifest.timings.insert("train_seconds".into(), train_seconds);
    manifest.timings.insert("total_seconds".into(), start.elapsed().as_secs_f64());
    manifest.write(out)?;
    observer.progress.say(match outcome.best_epoch {
        Some(e) => format!("best epoch {e}; checkpoint written to {}", model_path.display()),
        None => format!("no epochs run; initial checkpoint written to {}", model_path.display()),
    });
    Ok(())
}

