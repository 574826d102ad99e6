//! `pragma derive-labels`

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use pragma_core::memory::derive_labels_sampled;
use pragma_core::rsa::{PriorUpdateMode, RsaConfig};

use crate::error::CliError;
use crate::io;
use crate::resolve_seed;

#[derive(Args)]
pub struct DeriveLabelsArgs {
    /// Training instances (JSON-lines with candidate sets).
    #[arg(long)]
    pub train: PathBuf,
    /// Persona table (JSON array of sentence arrays).
    #[arg(long)]
    pub personas: PathBuf,
    /// Speaker snapshot.
    #[arg(long)]
    pub speaker: PathBuf,
    /// Labeled examples output (JSON-lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Candidate personas evaluated per dialogue.
    #[arg(long, default_value_t = 16)]
    pub pool_size: usize,
    #[arg(long, default_value_t = 8.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct LabelSummary {
    examples: usize,
    distinct_labels: usize,
    label_histogram: BTreeMap<String, usize>,
    out: String,
}

pub fn run(args: DeriveLabelsArgs) -> Result<(), CliError> {
    let speaker = io::load_speaker(&args.speaker)?;
    let instances = io::read_instances(&args.train)?;
    let persona_table = io::read_personas(&args.personas)?;
    let seed = resolve_seed(args.seed, None);
    let config = RsaConfig {
        alpha: args.alpha,
        beta: args.beta,
        world_size: 2,
        prior_mode: PriorUpdateMode::L0,
        max_length: 30,
    };
    let examples = derive_labels_sampled(
        &speaker,
        &instances,
        &persona_table,
        args.pool_size,
        &config,
        seed,
    )?;
    io::write_jsonl(&args.out, &examples)?;

    let mut histogram: BTreeMap<String, usize> = BTreeMap::new();
    for example in &examples {
        *histogram.entry(example.label.to_string()).or_insert(0) += 1;
    }
    let summary = LabelSummary {
        examples: examples.len(),
        distinct_labels: histogram.len(),
        label_histogram: histogram,
        out: args.out.display().to_string(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Internal(e.to_string()))?
    );
    Ok(())
}
