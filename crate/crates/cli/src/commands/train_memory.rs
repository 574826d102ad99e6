//! `pragma train-memory`

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use pragma_core::memory::{HashingEmbedder, MemoryConfig, MemoryStore};

use crate::error::CliError;
use crate::io;
use crate::resolve_seed;

#[derive(Args)]
pub struct TrainMemoryArgs {
    /// Labeled examples (JSON-lines of {"persona", "context", "label"}).
    #[arg(long)]
    pub labels: PathBuf,
    /// Persona table the labels index into.
    #[arg(long)]
    pub personas: PathBuf,
    /// Memory snapshot output (binary; persona sidecar written next to it).
    #[arg(long)]
    pub out: PathBuf,
    /// Memory slots m.
    #[arg(long, default_value_t = 1024)]
    pub slots: usize,
    /// Key dimension d.
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    /// Neighborhood size for training lookups.
    #[arg(long, default_value_t = 64)]
    pub knn: usize,
    /// Positive margin of the ranking loss.
    #[arg(long, default_value_t = 0.2)]
    pub margin: f64,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    /// Seed of the hashing embedder; must match at retrieval time.
    #[arg(long, default_value_t = 0)]
    pub embed_seed: u64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct MemorySummary {
    examples: usize,
    slots: usize,
    dim: usize,
    epochs: usize,
    loss_curve: Vec<f64>,
    retrieval_accuracy: f64,
    out: String,
}

pub fn run(args: TrainMemoryArgs) -> Result<(), CliError> {
    let examples = io::read_examples(&args.labels)?;
    let persona_table = io::read_personas(&args.personas)?;
    let seed = resolve_seed(args.seed, None);
    let config = MemoryConfig {
        slots: args.slots,
        dim: args.dim,
        knn_k: args.knn,
        margin: args.margin,
    };
    let embedder = HashingEmbedder::new(args.dim, args.embed_seed);
    let mut store = MemoryStore::init(config, persona_table, seed)?;
    let loss_curve = store.train_memory(&examples, &embedder, args.epochs, seed)?;
    let retrieval_accuracy = store.retrieval_accuracy(&embedder, &examples)?;
    io::save_memory(&args.out, &store)?;

    let summary = MemorySummary {
        examples: examples.len(),
        slots: args.slots,
        dim: args.dim,
        epochs: args.epochs,
        loss_curve,
        retrieval_accuracy,
        out: args.out.display().to_string(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Internal(e.to_string()))?
    );
    Ok(())
}
