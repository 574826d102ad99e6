//! `pragma chat` — an interactive session with the self-conscious speaker.
//!
//! Plain lines are partner turns; the agent replies with a greedy decode.
//! `/alpha`, `/beta`, and `/persona` adjust the configuration live, `/trace`
//! prints the last decode trace, `/quit` leaves.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::Args;

use pragma_core::lm::{
    Condition, ConditionedNGramSpeaker, DialogueHistory, Speaker, SpeakerTag,
};
use pragma_core::memory::{baseline_select, BaselineMethod, HashingEmbedder, MemoryStore};
use pragma_core::rng::SplitMix64;
use pragma_core::rsa::{decode_greedy, DecodeTrace, PriorUpdateMode, RsaConfig, World};
use pragma_core::text;

use super::eval::SelectorArg;
use crate::error::CliError;
use crate::io;
use crate::resolve_seed;

#[derive(Args)]
pub struct ChatArgs {
    /// Speaker snapshot.
    #[arg(long)]
    pub speaker: PathBuf,
    /// Persona sentences separated by '|'. Defaults to the first table
    /// persona when --personas is given.
    #[arg(long)]
    pub persona: Option<String>,
    /// Persona table for distractor selection.
    #[arg(long)]
    pub personas: Option<PathBuf>,
    /// Memory snapshot for the memory selector.
    #[arg(long)]
    pub memory: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub selector: Option<SelectorArg>,
    /// Speaker rationality (generation default).
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    /// Listener rationality (generation default).
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value_t = 3)]
    pub world_size: usize,
    #[arg(long, default_value_t = 30)]
    pub max_length: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub embed_seed: u64,
}

struct ChatState {
    speaker: ConditionedNGramSpeaker,
    persona: Condition,
    persona_table: Vec<Condition>,
    memory: Option<MemoryStore>,
    embedder: HashingEmbedder,
    selector: SelectorArg,
    config: RsaConfig,
    seed: u64,
    history: DialogueHistory,
    turn: u64,
    last_trace: Option<DecodeTrace>,
}

const HELP: &str = "commands:\n  /alpha X     set speaker rationality\n  /beta X      set listener rationality\n  /persona a | b | c   replace the persona\n  /trace       print the last decode trace\n  /help        this text\n  /quit        exit\nanything else is a partner turn.";

pub fn run(args: ChatArgs) -> Result<(), CliError> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    run_with_io(args, &mut stdin.lock(), &mut stdout.lock())
}

fn parse_persona(raw: &str) -> Result<Condition, CliError> {
    let sentences: Vec<String> = raw
        .split('|')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    Condition::persona_from_texts(&sentences)
        .map_err(|_| CliError::usage("persona must contain at least one nonempty sentence"))
}

fn run_with_io(
    args: ChatArgs,
    input: &mut impl BufRead,
    output: &mut impl Write,
) -> Result<(), CliError> {
    let speaker = io::load_speaker(&args.speaker)?;
    let persona_table = match &args.personas {
        Some(path) => io::read_personas(path)?,
        None => Vec::new(),
    };
    let memory = match &args.memory {
        Some(path) => Some(io::load_memory(path, 64, 0.2)?),
        None => None,
    };
    let persona = match &args.persona {
        Some(raw) => parse_persona(raw)?,
        None => persona_table
            .first()
            .cloned()
            .ok_or_else(|| CliError::usage("provide --persona or a --personas table"))?,
    };
    let selector = args.selector.unwrap_or({
        if memory.is_some() {
            SelectorArg::Memory
        } else if !persona_table.is_empty() {
            SelectorArg::Random
        } else {
            SelectorArg::None
        }
    });
    if selector == SelectorArg::Memory && memory.is_none() {
        return Err(CliError::usage(
            "selector \"memory\" requires --memory pointing at a memory snapshot",
        ));
    }
    if matches!(
        selector,
        SelectorArg::Random | SelectorArg::Nearest | SelectorArg::Farthest
    ) && persona_table.is_empty()
    {
        return Err(CliError::usage(
            "this selector requires --personas pointing at a persona table",
        ));
    }

    let embed_dim = memory
        .as_ref()
        .map(|m| m.dim())
        .unwrap_or(pragma_core::memory::DEFAULT_EMBED_DIM);
    let mut state = ChatState {
        embedder: HashingEmbedder::new(embed_dim, args.embed_seed),
        speaker,
        persona,
        persona_table,
        memory,
        selector,
        config: RsaConfig {
            alpha: args.alpha,
            beta: args.beta,
            world_size: args.world_size,
            prior_mode: PriorUpdateMode::L0,
            max_length: args.max_length,
        },
        seed: resolve_seed(args.seed, None),
        history: DialogueHistory::empty(),
        turn: 0,
        last_trace: None,
    };

    writeln!(output, "persona:").map_err(io_err)?;
    for sentence in state.persona.sentence_texts() {
        writeln!(output, "  - {sentence}").map_err(io_err)?;
    }
    writeln!(
        output,
        "alpha {} beta {} world {} selector {:?}; /help for commands",
        state.config.alpha, state.config.beta, state.config.world_size, state.selector
    )
    .map_err(io_err)?;

    let mut line = String::new();
    loop {
        write!(output, "you> ").map_err(io_err)?;
        output.flush().map_err(io_err)?;
        line.clear();
        if input.read_line(&mut line).map_err(io_err)? == 0 {
            writeln!(output).map_err(io_err)?;
            return Ok(()); // EOF
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(command) = trimmed.strip_prefix('/') {
            if !handle_command(command, &mut state, output)? {
                return Ok(());
            }
            continue;
        }
        let reply = respond(&mut state, trimmed)?;
        writeln!(output, "agent> {reply}").map_err(io_err)?;
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Internal(format!("terminal io failed: {e}"))
}

/// Returns false when the session should end.
fn handle_command(
    command: &str,
    state: &mut ChatState,
    output: &mut impl Write,
) -> Result<bool, CliError> {
    let (name, rest) = match command.split_once(char::is_whitespace) {
        Some((name, rest)) => (name, rest.trim()),
        None => (command, ""),
    };
    match name {
        "quit" | "exit" => return Ok(false),
        "help" => writeln!(output, "{HELP}").map_err(io_err)?,
        "alpha" => match rest.parse::<f64>() {
            Ok(value) if value >= 0.0 => {
                state.config.alpha = value;
                writeln!(output, "alpha = {value}").map_err(io_err)?;
            }
            _ => writeln!(output, "usage: /alpha <nonnegative number>\n{HELP}").map_err(io_err)?,
        },
        "beta" => match rest.parse::<f64>() {
            Ok(value) if value >= 0.0 => {
                state.config.beta = value;
                writeln!(output, "beta = {value}").map_err(io_err)?;
            }
            _ => writeln!(output, "usage: /beta <nonnegative number>\n{HELP}").map_err(io_err)?,
        },
        "persona" => match parse_persona(rest) {
            Ok(condition) => {
                state.persona = condition;
                writeln!(output, "persona updated").map_err(io_err)?;
            }
            Err(_) => {
                writeln!(output, "usage: /persona sentence [| sentence ...]\n{HELP}")
                    .map_err(io_err)?;
            }
        },
        "trace" => match &state.last_trace {
            Some(trace) => {
                for step in &trace.steps {
                    let tops: Vec<String> = step
                        .s1_top5
                        .iter()
                        .take(3)
                        .map(|(token, p)| format!("{token}:{p:.3}"))
                        .collect();
                    writeln!(
                        output,
                        "t={} token={} target_belief {:.3} -> {:.3} s1_top [{}]",
                        step.t,
                        step.token,
                        step.prior_before[0],
                        step.prior_after[0],
                        tops.join(" ")
                    )
                    .map_err(io_err)?;
                }
            }
            None => writeln!(output, "no decode yet").map_err(io_err)?,
        },
        _ => writeln!(output, "unknown command /{name}\n{HELP}").map_err(io_err)?,
    }
    Ok(true)
}

fn respond(state: &mut ChatState, partner_line: &str) -> Result<String, CliError> {
    state.history.push_text(SpeakerTag::Partner, partner_line);
    state.turn += 1;

    let wanted = state.config.world_size.saturating_sub(1);
    let turn_seed = SplitMix64::stream(state.seed, state.turn).next_u64();
    let distractors = match state.selector {
        SelectorArg::None => Vec::new(),
        SelectorArg::Random => {
            let pool: Vec<Condition> = state
                .persona_table
                .iter()
                .filter(|p| **p != state.persona)
                .cloned()
                .collect();
            let take = wanted.min(pool.len());
            baseline_select(
                BaselineMethod::Random,
                &state.persona,
                &pool,
                &state.embedder,
                take,
                turn_seed,
            )?
        }
        SelectorArg::Nearest | SelectorArg::Farthest => {
            let method = if state.selector == SelectorArg::Nearest {
                BaselineMethod::Nearest
            } else {
                BaselineMethod::Farthest
            };
            let pool: Vec<Condition> = state
                .persona_table
                .iter()
                .filter(|p| **p != state.persona)
                .cloned()
                .collect();
            let take = wanted.min(pool.len());
            baseline_select(method, &state.persona, &pool, &state.embedder, take, turn_seed)?
        }
        SelectorArg::Memory => {
            let store = state.memory.as_ref().expect("checked at startup");
            let context: Vec<String> = state
                .history
                .turns()
                .iter()
                .map(|t| text::detokenize(&t.tokens))
                .collect();
            store
                .retrieve_distractors(&state.embedder, &state.persona, &context, wanted)?
                .0
        }
    };

    let world = World::new(state.persona.clone(), distractors);
    let (token_ids, trace) =
        decode_greedy(&state.speaker, &world, &state.history, &state.config)?;
    let tokens: Vec<String> = token_ids
        .iter()
        .map(|&id| state.speaker.vocab().token(id).to_string())
        .collect();
    let reply = text::detokenize(&tokens);
    state.history.push_text(SpeakerTag::Agent, &reply);
    state.last_trace = Some(trace);
    Ok(reply)
}
