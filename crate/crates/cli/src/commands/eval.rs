//! `pragma eval`

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use pragma_core::harness::{
    default_lexicon, run_evaluation, EvalConfig, EvalMode, EvalResources, EvalRun, Selector,
};
use pragma_core::lm::Condition;
use pragma_core::memory::{Embedder, HashingEmbedder, MemoryStore};
use pragma_core::rsa::{PriorUpdateMode, RsaConfig};

use crate::error::CliError;
use crate::io;
use crate::resolve_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorModeArg {
    L0,
    L1,
    Uniform,
    /// Run all three modes and emit one report per mode.
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorArg {
    None,
    Random,
    Nearest,
    Farthest,
    Memory,
}

impl From<SelectorArg> for Selector {
    fn from(value: SelectorArg) -> Self {
        match value {
            SelectorArg::None => Selector::None,
            SelectorArg::Random => Selector::Random,
            SelectorArg::Nearest => Selector::Nearest,
            SelectorArg::Farthest => Selector::Farthest,
            SelectorArg::Memory => Selector::Memory,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Persona,
    Context,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Speaker snapshot. May also come from the config file.
    #[arg(long)]
    pub speaker: Option<PathBuf>,
    /// Evaluation dataset (JSON-lines of dialogue instances).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Persona table for the random/nearest/farthest selectors.
    #[arg(long)]
    pub personas: Option<PathBuf>,
    /// Memory snapshot for the memory selector.
    #[arg(long)]
    pub memory: Option<PathBuf>,
    /// JSON config file with flat keys mirroring these flags; flags override.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub world_size: Option<usize>,
    #[arg(long, value_enum)]
    pub prior_mode: Option<PriorModeArg>,
    #[arg(long, value_enum)]
    pub selector: Option<SelectorArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Penalize oracle-flagged contradictory candidates after ranking.
    #[arg(long)]
    pub nli_rerank: bool,
    #[arg(long)]
    pub max_length: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hashing-embedder dimension (defaults to the memory's dimension, else 256).
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub embed_seed: Option<u64>,
    /// Write the report JSON here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Export per-step decode traces as JSON-lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalFileConfig {
    speaker: Option<PathBuf>,
    dataset: Option<PathBuf>,
    personas: Option<PathBuf>,
    memory: Option<PathBuf>,
    alpha: Option<f64>,
    beta: Option<f64>,
    world_size: Option<usize>,
    prior_mode: Option<PriorModeArg>,
    selector: Option<SelectorArg>,
    mode: Option<ModeArg>,
    nli_rerank: Option<bool>,
    max_length: Option<usize>,
    seed: Option<u64>,
    embed_dim: Option<usize>,
    embed_seed: Option<u64>,
}

pub fn run(args: EvalArgs) -> Result<(), CliError> {
    let file: EvalFileConfig = match &args.config {
        Some(path) => io::read_json(path)?,
        None => EvalFileConfig::default(),
    };

    let speaker_path = args
        .speaker
        .or(file.speaker)
        .ok_or_else(|| CliError::usage("--speaker (or config key \"speaker\") is required"))?;
    let dataset_path = args
        .dataset
        .or(file.dataset)
        .ok_or_else(|| CliError::usage("--dataset (or config key \"dataset\") is required"))?;
    let personas_path = args.personas.or(file.personas);
    let memory_path = args.memory.or(file.memory);

    let defaults = RsaConfig::ranking();
    let alpha = args.alpha.or(file.alpha).unwrap_or(defaults.alpha);
    let beta = args.beta.or(file.beta).unwrap_or(defaults.beta);
    let world_size = args
        .world_size
        .or(file.world_size)
        .unwrap_or(defaults.world_size);
    let max_length = args
        .max_length
        .or(file.max_length)
        .unwrap_or(defaults.max_length);
    let prior_mode = args
        .prior_mode
        .or(file.prior_mode)
        .unwrap_or(PriorModeArg::L0);
    let selector: Selector = args
        .selector
        .or(file.selector)
        .unwrap_or(SelectorArg::None)
        .into();
    let mode = match args.mode.or(file.mode).unwrap_or(ModeArg::Persona) {
        ModeArg::Persona => EvalMode::Persona,
        ModeArg::Context => EvalMode::Context,
    };
    let nli_rerank = args.nli_rerank || file.nli_rerank.unwrap_or(false);
    let seed = resolve_seed(args.seed, file.seed);
    let embed_seed = args.embed_seed.or(file.embed_seed).unwrap_or(0);

    if selector == Selector::Memory && memory_path.is_none() {
        return Err(CliError::usage(
            "selector \"memory\" requires --memory pointing at a memory snapshot",
        ));
    }
    if matches!(
        selector,
        Selector::Random | Selector::Nearest | Selector::Farthest
    ) && personas_path.is_none()
    {
        return Err(CliError::usage(
            "this selector requires --personas pointing at a persona table",
        ));
    }

    let speaker = io::load_speaker(&speaker_path)?;
    let dataset = io::read_instances(&dataset_path)?;
    let persona_table: Vec<Condition> = match &personas_path {
        Some(path) => io::read_personas(path)?,
        None => Vec::new(),
    };
    let memory: Option<MemoryStore> = match &memory_path {
        Some(path) => Some(io::load_memory(path, 64, 0.2)?),
        None => None,
    };
    let embed_dim = args
        .embed_dim
        .or(file.embed_dim)
        .or_else(|| memory.as_ref().map(|m| m.dim()))
        .unwrap_or(pragma_core::memory::DEFAULT_EMBED_DIM);
    let embedder = HashingEmbedder::new(embed_dim, embed_seed);
    let lexicon = default_lexicon();

    let resources = EvalResources {
        persona_table: &persona_table,
        memory: memory.as_ref(),
        embedder: Some(&embedder as &dyn Embedder),
        lexicon: Some(&lexicon),
    };

    let run_one = |prior_mode: PriorUpdateMode| -> Result<EvalRun, CliError> {
        let config = EvalConfig {
            rsa: RsaConfig {
                alpha,
                beta,
                world_size,
                prior_mode,
                max_length,
            },
            selector,
            mode,
            nli_rerank,
            seed,
        };
        Ok(run_evaluation(&speaker, &dataset, &config, &resources)?)
    };

    let output = match prior_mode {
        PriorModeArg::Sweep => {
            if args.trace.is_some() {
                return Err(CliError::usage(
                    "--trace is not supported with --prior-mode sweep",
                ));
            }
            let l0 = run_one(PriorUpdateMode::L0)?;
            let l1 = run_one(PriorUpdateMode::L1)?;
            let uniform = run_one(PriorUpdateMode::Uniform)?;
            json!({
                "schema_version": pragma_core::harness::REPORT_SCHEMA_VERSION,
                "sweep": "prior_mode",
                "reports": {
                    "l0": l0.report,
                    "l1": l1.report,
                    "uniform": uniform.report,
                },
            })
        }
        single => {
            let mode = match single {
                PriorModeArg::L0 => PriorUpdateMode::L0,
                PriorModeArg::L1 => PriorUpdateMode::L1,
                PriorModeArg::Uniform => PriorUpdateMode::Uniform,
                PriorModeArg::Sweep => unreachable!(),
            };
            let run = run_one(mode)?;
            if let Some(trace_path) = &args.trace {
                io::export_traces(trace_path, &run.traces)?;
            }
            serde_json::to_value(&run.report).map_err(|e| CliError::Internal(e.to_string()))?
        }
    };

    let rendered =
        serde_json::to_string_pretty(&output).map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(out) = &args.out {
        std::fs::write(out, format!("{rendered}\n")).map_err(|e| CliError::writing(out, e))?;
    }
    println!("{rendered}");
    Ok(())
}
