use std::fs;
use std::time::Instant;

use twostage_core::data::{generate_synthetic, SynthConfig};

use super::{create_out_dir, read_config, Progress};
use crate::cli::SynthArgs;
use crate::corpus::{write_corpus, DEV_FILE, SYNTH_MANIFEST_FILE, TEST_FILE, TRAIN_FILE};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

/// Desk-scale long-tail corpus: 2,000 documents, 60 parents, 300 children,
/// with every frequency group populated and distractor mentions of
/// children from absent parents.
pub fn default_synth_config(seed: u64) -> SynthConfig {
    let mut cfg = SynthConfig::new(2000, 60, 5, 3000, seed);
    cfg.labels_per_doc_mean = 5.0;
    cfg.frequency_skew = 1.0;
    cfg.distractor_labels_mean = 5.0;
    cfg
}

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    let start = Instant::now();
    let progress = Progress { quiet: args.common.quiet };
    let mut cfg = match &args.common.config {
        Some(path) => read_config::<SynthConfig>(path)?.1,
        None => default_synth_config(0),
    };
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.num_documents {
        cfg.num_documents = n;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let corpus = generate_synthetic(&cfg)?;
    let out = &args.common.out;
    create_out_dir(out)?;
    let mut manifest = RunManifest::new("synth", &cfg, cfg.seed);
    if let Some(path) = &args.common.config {
        manifest.add_input(path)?;
    }
    for (name, docs) in [(TRAIN_FILE, &corpus.train), (DEV_FILE, &corpus.dev), (TEST_FILE, &corpus.test)] {
        let path = out.join(name);
        write_corpus(&path, docs)?;
        manifest.add_output(&path)?;
    }
    let sidecar = out.join(SYNTH_MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&corpus.manifest).expect("manifest serializes");
    fs::write(&sidecar, text + "\n").map_err(|e| CliError::io(&sidecar, e))?;
    manifest.add_output(&sidecar)?;
    manifest.timings.insert("total_seconds".into(), start.elapsed().as_secs_f64());
    manifest.write(out)?;
    progress.say(format!(
        "wrote {} train / {} dev / {} test documents with {} child codes to {}",
        corpus.train.len(),
        corpus.dev.len(),
        corpus.test.len(),
        corpus.manifest.child_codes.len(),
        out.display()
    ));
    Ok(())
}
