//! File formats: JSON-lines datasets, the speaker snapshot, the binary
//! memory snapshot with its persona sidecar, and trace export.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use pragma_core::harness::DialogueInstance;
use pragma_core::lm::{Condition, ConditionedNGramSpeaker, SpeakerParts, TrainingDialogue};
use pragma_core::memory::{MemoryConfig, MemoryStore, TrainExample};
use pragma_core::rsa::DecodeTrace;

use crate::error::CliError;

pub const SPEAKER_SCHEMA_VERSION: u32 = 1;
pub const MEMORY_SCHEMA_VERSION: u32 = 1;

// ---- JSON lines ----

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| CliError::reading(path, e))?;
    let reader = BufReader::new(file);
    let mut items = Vec::new();
    for (number, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::reading(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| {
            CliError::usage(format!("{}:{}: {e}", path.display(), number + 1))
        })?;
        items.push(item);
    }
    Ok(items)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::writing(path, e))?;
    let mut writer = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item)
            .map_err(|e| CliError::Internal(format!("serialization failed: {e}")))?;
        writeln!(writer, "{line}").map_err(|e| CliError::writing(path, e))?;
    }
    writer.flush().map_err(|e| CliError::writing(path, e))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::writing(path, e))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)
        .map_err(|e| CliError::Internal(format!("serialization failed: {e}")))?;
    writeln!(writer).map_err(|e| CliError::writing(path, e))?;
    writer.flush().map_err(|e| CliError::writing(path, e))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let file = File::open(path).map_err(|e| CliError::reading(path, e))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

// ---- datasets ----

pub fn read_instances(path: &Path) -> Result<Vec<DialogueInstance>, CliError> {
    let instances: Vec<DialogueInstance> = read_jsonl(path)?;
    for instance in &instances {
        instance
            .validate()
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    }
    Ok(instances)
}

pub fn read_corpus(path: &Path) -> Result<Vec<TrainingDialogue>, CliError> {
    read_jsonl(path)
}

pub fn read_examples(path: &Path) -> Result<Vec<TrainExample>, CliError> {
    read_jsonl(path)
}

// ---- persona table ----

/// Personas serialize as arrays of sentence strings.
pub fn write_personas(path: &Path, personas: &[Condition]) -> Result<(), CliError> {
    let texts: Vec<Vec<String>> = personas.iter().map(|p| p.sentence_texts()).collect();
    write_json(path, &texts)
}

pub fn read_personas(path: &Path) -> Result<Vec<Condition>, CliError> {
    let texts: Vec<Vec<String>> = read_json(path)?;
    texts
        .iter()
        .map(|sentences| {
            Condition::persona_from_texts(sentences)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
        })
        .collect()
}

// ---- speaker snapshot ----

#[derive(Serialize, Deserialize)]
struct SpeakerSnapshot {
    schema_version: u32,
    speaker: SpeakerParts,
}

pub fn save_speaker(path: &Path, speaker: &ConditionedNGramSpeaker) -> Result<(), CliError> {
    write_json(
        path,
        &SpeakerSnapshot {
            schema_version: SPEAKER_SCHEMA_VERSION,
            speaker: speaker.to_parts(),
        },
    )
}

pub fn load_speaker(path: &Path) -> Result<ConditionedNGramSpeaker, CliError> {
    let snapshot: SpeakerSnapshot = read_json(path)?;
    if snapshot.schema_version != SPEAKER_SCHEMA_VERSION {
        return Err(CliError::usage(format!(
            "{}: unsupported speaker snapshot version {}",
            path.display(),
            snapshot.schema_version
        )));
    }
    ConditionedNGramSpeaker::from_parts(snapshot.speaker)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

// ---- memory snapshot ----
//
// Little-endian binary: u32 version, u64 slots, u64 dim, then slots*dim f64
// keys (row-major), slots u32 values, slots u64 ages. The persona table
// travels in a JSON sidecar at `<path>.personas.json`.

pub fn memory_sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".personas.json");
    std::path::PathBuf::from(name)
}

pub fn save_memory(path: &Path, store: &MemoryStore) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::writing(path, e))?;
    let mut writer = BufWriter::new(file);
    let write_err = |e: std::io::Error| CliError::writing(path, e);
    writer
        .write_all(&MEMORY_SCHEMA_VERSION.to_le_bytes())
        .map_err(write_err)?;
    writer
        .write_all(&(store.slots() as u64).to_le_bytes())
        .map_err(write_err)?;
    writer
        .write_all(&(store.dim() as u64).to_le_bytes())
        .map_err(write_err)?;
    for value in store.keys_flat() {
        writer.write_all(&value.to_le_bytes()).map_err(write_err)?;
    }
    for value in store.values() {
        writer.write_all(&value.to_le_bytes()).map_err(write_err)?;
    }
    for age in store.ages() {
        writer.write_all(&age.to_le_bytes()).map_err(write_err)?;
    }
    writer.flush().map_err(write_err)?;
    write_personas(&memory_sidecar_path(path), store.persona_table())
}

pub fn load_memory(path: &Path, knn_k: usize, margin: f64) -> Result<MemoryStore, CliError> {
    let file = File::open(path).map_err(|e| CliError::reading(path, e))?;
    let mut reader = BufReader::new(file);
    let read_err = |e: std::io::Error| CliError::reading(path, e);

    let mut u32_buf = [0u8; 4];
    let mut u64_buf = [0u8; 8];
    reader.read_exact(&mut u32_buf).map_err(read_err)?;
    let version = u32::from_le_bytes(u32_buf);
    if version != MEMORY_SCHEMA_VERSION {
        return Err(CliError::usage(format!(
            "{}: unsupported memory snapshot version {version}",
            path.display()
        )));
    }
    reader.read_exact(&mut u64_buf).map_err(read_err)?;
    let slots = u64::from_le_bytes(u64_buf) as usize;
    reader.read_exact(&mut u64_buf).map_err(read_err)?;
    let dim = u64::from_le_bytes(u64_buf) as usize;

    let mut keys = Vec::with_capacity(slots * dim);
    for _ in 0..slots * dim {
        reader.read_exact(&mut u64_buf).map_err(read_err)?;
        keys.push(f64::from_le_bytes(u64_buf));
    }
    let mut values = Vec::with_capacity(slots);
    for _ in 0..slots {
        reader.read_exact(&mut u32_buf).map_err(read_err)?;
        values.push(u32::from_le_bytes(u32_buf));
    }
    let mut ages = Vec::with_capacity(slots);
    for _ in 0..slots {
        reader.read_exact(&mut u64_buf).map_err(read_err)?;
        ages.push(u64::from_le_bytes(u64_buf));
    }
    let persona_table = read_personas(&memory_sidecar_path(path))?;
    let config = MemoryConfig {
        slots,
        dim,
        knn_k: knn_k.min(slots),
        margin,
    };
    MemoryStore::from_parts(config, keys, values, ages, persona_table)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

// ---- trace export ----

/// One exported decode step.
#[derive(Serialize)]
struct TraceLine<'a> {
    t: usize,
    token: &'a str,
    prior_before: &'a [f64],
    posterior: &'a [f64],
    s1_top5: &'a [(String, f64)],
}

/// JSON-lines export: one object per step, instances back to back (the step
/// counter restarting at 1 marks an instance boundary).
pub fn export_traces(path: &Path, traces: &[DecodeTrace]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::writing(path, e))?;
    let mut writer = BufWriter::new(file);
    for trace in traces {
        for step in &trace.steps {
            let line = TraceLine {
                t: step.t,
                token: &step.token,
                prior_before: &step.prior_before,
                posterior: &step.posterior,
                s1_top5: &step.s1_top5,
            };
            let json = serde_json::to_string(&line)
                .map_err(|e| CliError::Internal(format!("serialization failed: {e}")))?;
            writeln!(writer, "{json}").map_err(|e| CliError::writing(path, e))?;
        }
    }
    writer.flush().map_err(|e| CliError::writing(path, e))?;
    Ok(())
}
