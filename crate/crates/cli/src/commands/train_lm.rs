//! `pragma train-lm`

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use pragma_core::lm::{ConditionedNGramSpeaker, Speaker, SpeakerConfig};

use crate::error::CliError;
use crate::io;

#[derive(Args)]
pub struct TrainLmArgs {
    /// JSON-lines corpus: one {"condition": [...], "turns": [...]} per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Speaker snapshot output path (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// History model order n.
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub lambda_cond: Option<f64>,
    #[arg(long)]
    pub lambda_hist: Option<f64>,
    #[arg(long)]
    pub lambda_bg: Option<f64>,
    /// Add-k smoothing constant.
    #[arg(long)]
    pub smoothing: Option<f64>,
}

#[derive(Serialize)]
struct TrainSummary {
    dialogues: usize,
    vocab_size: usize,
    out: String,
}

pub fn run(args: TrainLmArgs) -> Result<(), CliError> {
    let corpus = io::read_corpus(&args.corpus)?;
    let defaults = SpeakerConfig::default();
    let config = SpeakerConfig {
        order: args.order.unwrap_or(defaults.order),
        lambda_cond: args.lambda_cond.unwrap_or(defaults.lambda_cond),
        lambda_hist: args.lambda_hist.unwrap_or(defaults.lambda_hist),
        lambda_bg: args.lambda_bg.unwrap_or(defaults.lambda_bg),
        smoothing: args.smoothing.unwrap_or(defaults.smoothing),
    };
    let speaker = ConditionedNGramSpeaker::train(&corpus, config)?;
    io::save_speaker(&args.out, &speaker)?;
    let summary = TrainSummary {
        dialogues: corpus.len(),
        vocab_size: speaker.vocab().len(),
        out: args.out.display().to_string(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Internal(e.to_string()))?
    );
    Ok(())
}
