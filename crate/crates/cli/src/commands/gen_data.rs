//! `pragma gen-data`

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use pragma_core::harness::{generate_dataset, GeneratorSpec};

use crate::error::CliError;
use crate::io;
use crate::resolve_seed;

#[derive(Args)]
pub struct GenDataArgs {
    /// Output directory; created if absent.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON spec file; flags override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of training instances.
    #[arg(long)]
    pub train: Option<usize>,
    /// Number of evaluation instances.
    #[arg(long)]
    pub eval: Option<usize>,
    /// Size of the training persona table.
    #[arg(long)]
    pub personas: Option<usize>,
    /// Ground-truth replies restate one of the agent's earlier turns.
    #[arg(long)]
    pub context_reuse: bool,
}

/// Flat JSON mirror of the generator spec plus a seed.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    train_instances: Option<usize>,
    eval_instances: Option<usize>,
    personas: Option<usize>,
    persona_sentences_min: Option<usize>,
    persona_sentences_max: Option<usize>,
    entail_candidates: Option<usize>,
    neutral_candidates: Option<usize>,
    contradict_candidates: Option<usize>,
    popular_bias: Option<f64>,
    eager_rate: Option<f64>,
    gt_reuses_history: Option<bool>,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct GenSummary {
    seed: u64,
    train_instances: usize,
    eval_instances: usize,
    corpus_dialogues: usize,
    personas: usize,
    out: String,
}

pub fn run(args: GenDataArgs) -> Result<(), CliError> {
    let file: SpecFile = match &args.spec {
        Some(path) => io::read_json(path)?,
        None => SpecFile::default(),
    };
    let defaults = GeneratorSpec::default();
    let spec = GeneratorSpec {
        train_instances: args.train.or(file.train_instances).unwrap_or(defaults.train_instances),
        eval_instances: args.eval.or(file.eval_instances).unwrap_or(defaults.eval_instances),
        personas: args.personas.or(file.personas).unwrap_or(defaults.personas),
        persona_sentences_min: file
            .persona_sentences_min
            .unwrap_or(defaults.persona_sentences_min),
        persona_sentences_max: file
            .persona_sentences_max
            .unwrap_or(defaults.persona_sentences_max),
        entail_candidates: file.entail_candidates.unwrap_or(defaults.entail_candidates),
        neutral_candidates: file.neutral_candidates.unwrap_or(defaults.neutral_candidates),
        contradict_candidates: file
            .contradict_candidates
            .unwrap_or(defaults.contradict_candidates),
        popular_bias: file.popular_bias.unwrap_or(defaults.popular_bias),
        eager_rate: file.eager_rate.unwrap_or(defaults.eager_rate),
        gt_reuses_history: args.context_reuse || file.gt_reuses_history.unwrap_or(false),
    };
    let seed = resolve_seed(args.seed, file.seed);

    let data = generate_dataset(&spec, seed)?;

    std::fs::create_dir_all(&args.out).map_err(|e| CliError::writing(&args.out, e))?;
    io::write_jsonl(&args.out.join("train.jsonl"), &data.train)?;
    io::write_jsonl(&args.out.join("eval.jsonl"), &data.eval)?;
    io::write_jsonl(&args.out.join("corpus.jsonl"), &data.corpus)?;
    io::write_personas(&args.out.join("personas.json"), &data.persona_table)?;

    let summary = GenSummary {
        seed,
        train_instances: data.train.len(),
        eval_instances: data.eval.len(),
        corpus_dialogues: data.corpus.len(),
        personas: data.persona_table.len(),
        out: args.out.display().to_string(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::Internal(e.to_string()))?
    );
    Ok(())
}
