//! `pragma` — train, decode, and evaluate publicly self-conscious dialogue
//! speakers.

mod commands;
mod error;
mod io;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "pragma",
    version,
    about = "Pragmatic self-conscious decoding over candidate personas",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic persona-dialogue dataset and speaker corpus.
    GenData(commands::gen_data::GenDataArgs),
    /// Train the n-gram base speaker from a JSON-lines corpus.
    TrainLm(commands::train_lm::TrainLmArgs),
    /// Derive best-distractor labels for memory training.
    DeriveLabels(commands::derive_labels::DeriveLabelsArgs),
    /// Train the distractor memory from labeled examples.
    TrainMemory(commands::train_memory::TrainMemoryArgs),
    /// Rank candidates and decode responses over a dataset, emitting metrics.
    Eval(commands::eval::EvalArgs),
    /// Interactive chat with the self-conscious speaker.
    Chat(commands::chat::ChatArgs),
}

/// Seed precedence: flag, then config file, then PRAGMA_DECODE_SEED, then 0.
pub(crate) fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> u64 {
    flag.or(file)
        .or_else(|| {
            std::env::var("PRAGMA_DECODE_SEED")
                .ok()
                .and_then(|raw| raw.parse().ok())
        })
        .unwrap_or(0)
}

fn main() {
    let cli = Cli::parse();
    let result: Result<(), CliError> = match cli.command {
        Command::GenData(args) => commands::gen_data::run(args),
        Command::TrainLm(args) => commands::train_lm::run(args),
        Command::DeriveLabels(args) => commands::derive_labels::run(args),
        Command::TrainMemory(args) => commands::train_memory::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Chat(args) => commands::chat::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
