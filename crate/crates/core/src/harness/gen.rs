//! Synthetic persona-dialogue generator with triple annotations.
//!
//! Personas are rendered from a fixed inventory of relations, entities, and
//! sentence templates. Each instance carries one ground-truth utterance plus
//! labeled candidates: entailing candidates share the ground-truth triple,
//! contradicting candidates share `(entity1, relation)` with a different
//! object, and neutral candidates use relations the persona does not cover.
//!
//! Entity index 0 of every relation is sampled with extra probability when
//! building training personas, so its surface form becomes globally frequent
//! in the corpus. Contradicting candidates prefer that frequent entity; a
//! speaker that leans on history/background statistics then scores
//! contradictions as fluent, which reproduces the insensitivity the
//! evaluation is designed to expose. Ground-truth triples stick to the rarer
//! entities.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::lm::{Condition, SpeakerTag, TrainingDialogue, TrainingTurn};
use crate::rng::SplitMix64;

use super::data::{Candidate, CandidateLabel, DialogueInstance, PersonaSentence, Triple};
use super::HarnessError;

struct RelationSpec {
    name: &'static str,
    /// Six distinct single-token entities; index 0 is the frequent one.
    entities: [&'static str; 6],
    question: &'static str,
    /// The canonical answer shape; also the surface of every contradicting
    /// candidate (with a different entity).
    answer: &'static str,
    statements: [&'static str; 5],
}

const RELATIONS: [RelationSpec; 8] = [
    RelationSpec {
        name: "like_music",
        entities: ["pop", "rock", "jazz", "metal", "country", "blues"],
        question: "what kind of music do you like ?",
        answer: "{e} is the music i like best",
        statements: [
            "i like to listen to {e} music",
            "i really enjoy {e} music",
            "my favorite music is {e}",
            "i am a big fan of {e} music",
            "i listen to {e} music every day",
        ],
    },
    RelationSpec {
        name: "like_food",
        entities: ["pizza", "sushi", "tacos", "curry", "pasta", "salad"],
        question: "what is your favorite food ?",
        answer: "{e} is the food i like best",
        statements: [
            "i love eating {e}",
            "my favorite food is {e}",
            "i could eat {e} all day",
            "i always order {e} at restaurants",
            "nothing beats a plate of {e}",
        ],
    },
    RelationSpec {
        name: "have_pet",
        entities: ["dog", "cat", "bird", "fish", "hamster", "turtle"],
        question: "do you have any pets at home ?",
        answer: "a {e} is the pet i have",
        statements: [
            "i have a pet {e}",
            "my {e} is my best friend",
            "i own a {e}",
            "i take care of a {e}",
            "there is a {e} living with me",
        ],
    },
    RelationSpec {
        name: "favorite_color",
        entities: ["blue", "red", "green", "purple", "orange", "yellow"],
        question: "what color do you like most ?",
        answer: "{e} is the color i like best",
        statements: [
            "my favorite color is {e}",
            "i really like the color {e}",
            "i wear {e} all the time",
            "everything i own is {e}",
            "i painted my room {e}",
        ],
    },
    RelationSpec {
        name: "play_sport",
        entities: ["soccer", "tennis", "golf", "hockey", "rugby", "baseball"],
        question: "what sport do you play ?",
        answer: "{e} is the sport i play",
        statements: [
            "i play {e} on weekends",
            "i love playing {e}",
            "my favorite sport is {e}",
            "i practice {e} twice a week",
            "i joined a {e} team last year",
        ],
    },
    RelationSpec {
        name: "like_drink",
        entities: ["coffee", "tea", "juice", "soda", "lemonade", "cocoa"],
        question: "what do you usually drink ?",
        answer: "{e} is the drink i like best",
        statements: [
            "i drink {e} every morning",
            "i really like {e}",
            "a cup of {e} makes my day",
            "i cannot start my day without {e}",
            "my favorite drink is {e}",
        ],
    },
    RelationSpec {
        name: "favorite_season",
        entities: ["summer", "winter", "spring", "autumn", "monsoon", "harvest"],
        question: "which season do you like best ?",
        answer: "{e} is the season i like best",
        statements: [
            "i love the {e} season",
            "my favorite time of year is {e}",
            "i always wait for {e}",
            "i feel happiest during {e}",
            "my favorite season is {e}",
        ],
    },
    RelationSpec {
        name: "like_movie",
        entities: ["comedy", "horror", "drama", "action", "romance", "thriller"],
        question: "what movies do you watch ?",
        answer: "{e} movies are the ones i watch",
        statements: [
            "i watch {e} movies",
            "i am a huge fan of {e} films",
            "my favorite movies to see are {e}",
            "i watch a {e} movie every weekend",
            "my favorite movies are {e} ones",
        ],
    },
];

const PREFIXES: [&str; 4] = ["", "well", "you know", "honestly"];
const GREETING_PARTNER: &str = "hi how are you doing today ?";
const GREETING_AGENT: &str = "i am doing fine thanks for asking";
const REPEAT_PREFIX: &str = "sorry";
const ENTITY1: &str = "i";

/// A relation-agnostic reply shape: it opens with the entity like the
/// canonical answer but continues with conversational filler instead of the
/// persona's own wording. Fluent in context, entailing by triple, yet its
/// tail carries no per-word persona evidence.
const EAGER_TEMPLATE: &str = "{e} is my answer to that question";


fn realize(template: &str, entity: &str) -> String {
    template.replace("{e}", entity)
}

fn prefixed(prefix: &str, sentence: &str) -> String {
    if prefix.is_empty() {
        String::from(sentence)
    } else {
        format!("{prefix} {sentence}")
    }
}

/// What to generate and how.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub train_instances: usize,
    pub eval_instances: usize,
    /// Size of the training persona table (the distractor pool).
    pub personas: usize,
    pub persona_sentences_min: usize,
    pub persona_sentences_max: usize,
    pub entail_candidates: usize,
    pub neutral_candidates: usize,
    pub contradict_candidates: usize,
    /// Probability that a training persona picks a relation's frequent
    /// entity.
    pub popular_bias: f64,
    /// Fraction of warm-up answers in the corpus rendered with the eager
    /// echo shape, which controls how fluent that shape is.
    pub eager_rate: f64,
    /// Ground-truth replies restate something the agent already said in the
    /// history (the context-consistency setting).
    pub gt_reuses_history: bool,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            train_instances: 200,
            eval_instances: 200,
            personas: 64,
            persona_sentences_min: 3,
            persona_sentences_max: 5,
            entail_candidates: 10,
            neutral_candidates: 10,
            contradict_candidates: 10,
            popular_bias: 0.7,
            eager_rate: 0.3,
            gt_reuses_history: false,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.personas == 0 {
            return Err(HarnessError::InsufficientInventory(
                "persona table must hold at least one persona",
            ));
        }
        if self.personas > 10_000 {
            return Err(HarnessError::InsufficientInventory(
                "persona table larger than the inventory can keep distinct",
            ));
        }
        if self.persona_sentences_min < 1
            || self.persona_sentences_min > self.persona_sentences_max
        {
            return Err(HarnessError::InsufficientInventory(
                "persona sentence range is empty",
            ));
        }
        if self.persona_sentences_max > RELATIONS.len() - 1 {
            // One relation must stay free for neutral candidates.
            return Err(HarnessError::InsufficientInventory(
                "personas may cover at most all but one relation",
            ));
        }
        let entail_pool = RELATIONS[0].statements.len() * PREFIXES.len();
        if self.entail_candidates > entail_pool {
            return Err(HarnessError::InsufficientInventory(
                "not enough distinct entailing surfaces",
            ));
        }
        let contradict_pool = (RELATIONS[0].entities.len() - 1) * PREFIXES.len();
        if self.contradict_candidates > contradict_pool {
            return Err(HarnessError::InsufficientInventory(
                "not enough distinct contradicting surfaces",
            ));
        }
        if self.neutral_candidates > RELATIONS[0].statements.len() * PREFIXES.len() {
            return Err(HarnessError::InsufficientInventory(
                "not enough distinct neutral surfaces",
            ));
        }
        if !(0.0..=1.0).contains(&self.popular_bias) {
            return Err(HarnessError::InsufficientInventory(
                "popular bias must lie in [0, 1]",
            ));
        }
        if !(0.0..=1.0).contains(&self.eager_rate) {
            return Err(HarnessError::InsufficientInventory(
                "eager rate must lie in [0, 1]",
            ));
        }
        Ok(())
    }
}

/// Everything one generation run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    /// Labeled instances for distractor-label derivation (and any other
    /// training-side evaluation).
    pub train: Vec<DialogueInstance>,
    pub eval: Vec<DialogueInstance>,
    /// Base-speaker training corpus: inventory-coverage dialogues plus every
    /// training instance with its ground-truth reply appended.
    pub corpus: Vec<TrainingDialogue>,
    /// The training personas as conditions; distractor selectors index into
    /// this table.
    pub persona_table: Vec<Condition>,
}

#[derive(Clone)]
struct GenPersona {
    /// `(relation index, entity index)` per sentence.
    triples: Vec<(usize, usize)>,
    sentences: Vec<PersonaSentence>,
}

impl GenPersona {
    fn condition(&self) -> Condition {
        let texts: Vec<&str> = self.sentences.iter().map(|s| s.text.as_str()).collect();
        Condition::persona_from_texts(&texts).expect("generated persona is nonempty")
    }

    fn covers_relation(&self, relation: usize) -> bool {
        self.triples.iter().any(|&(r, _)| r == relation)
    }
}

fn sample_entity(rng: &mut SplitMix64, bias: f64) -> usize {
    if rng.next_f64() < bias {
        0
    } else {
        1 + rng.gen_range(RELATIONS[0].entities.len() - 1)
    }
}

fn sample_persona(rng: &mut SplitMix64, spec: &GeneratorSpec) -> GenPersona {
    let n_sentences =
        rng.gen_range_inclusive(spec.persona_sentences_min, spec.persona_sentences_max);
    let relations = rng.sample_indices(RELATIONS.len(), n_sentences);
    let mut triples = Vec::with_capacity(n_sentences);
    let mut sentences = Vec::with_capacity(n_sentences);
    for &relation in &relations {
        let spec_r = &RELATIONS[relation];
        let entity = sample_entity(rng, spec.popular_bias);
        let entity_text = spec_r.entities[entity];
        // Personas state their facts in the canonical answer shape. A reply
        // that echoes a persona fact then overlaps the condition on every
        // word, exactly as a merely entailing paraphrase does, so ranking
        // between them comes down to context fit.
        triples.push((relation, entity));
        sentences.push(PersonaSentence {
            text: realize(spec_r.answer, entity_text),
            triple: Some(Triple::new(ENTITY1, spec_r.name, entity_text)),
        });
    }
    GenPersona { triples, sentences }
}

/// A persona with at least one non-frequent entity, so a rare-entity
/// ground-truth triple exists.
fn sample_persona_with_rare_entity(rng: &mut SplitMix64, spec: &GeneratorSpec) -> GenPersona {
    loop {
        let persona = sample_persona(rng, spec);
        if persona.triples.iter().any(|&(_, e)| e != 0) {
            return persona;
        }
    }
}

fn build_candidates(
    rng: &mut SplitMix64,
    spec: &GeneratorSpec,
    persona: &GenPersona,
    gt_position: usize,
    gt_text: &str,
) -> Vec<Candidate> {
    let (gt_relation, gt_entity) = persona.triples[gt_position];
    let relation = &RELATIONS[gt_relation];
    let gt_triple = Triple::new(ENTITY1, relation.name, relation.entities[gt_entity]);

    let mut candidates = vec![Candidate {
        text: String::from(gt_text),
        label: CandidateLabel::Gt,
        triple: Some(gt_triple.clone()),
    }];

    // Entailing: other realizations of the ground-truth triple. The eager
    // echo is always present; the rest are sampled statement paraphrases.
    let mut entail_surfaces: Vec<String> = Vec::new();
    for statement in &relation.statements {
        for prefix in &PREFIXES {
            entail_surfaces.push(prefixed(prefix, &realize(statement, relation.entities[gt_entity])));
        }
    }
    rng.shuffle(&mut entail_surfaces);
    let mut entails = vec![realize(EAGER_TEMPLATE, relation.entities[gt_entity])];
    entails.extend(
        entail_surfaces
            .into_iter()
            .take(spec.entail_candidates.saturating_sub(1)),
    );
    for text in entails {
        candidates.push(Candidate {
            text,
            label: CandidateLabel::Entail,
            triple: Some(gt_triple.clone()),
        });
    }

    // Contradicting: the answer shape with a different entity, frequent
    // entity first so the sharpest trap is always present.
    let mut entity_order: Vec<usize> = Vec::new();
    if gt_entity != 0 {
        entity_order.push(0);
    }
    entity_order.extend((1..relation.entities.len()).filter(|&e| e != gt_entity));
    let mut taken = 0;
    'contradict: for &entity in &entity_order {
        for prefix in &PREFIXES {
            if taken == spec.contradict_candidates {
                break 'contradict;
            }
            candidates.push(Candidate {
                text: prefixed(prefix, &realize(relation.answer, relation.entities[entity])),
                label: CandidateLabel::Contradict,
                triple: Some(Triple::new(ENTITY1, relation.name, relation.entities[entity])),
            });
            taken += 1;
        }
    }

    // Neutral: statements about relations the persona does not cover.
    let free_relations: Vec<usize> =
        (0..RELATIONS.len()).filter(|&r| !persona.covers_relation(r)).collect();
    let mut seen: Vec<String> = Vec::new();
    let mut round = 0usize;
    while seen.len() < spec.neutral_candidates {
        let free = &RELATIONS[free_relations[round % free_relations.len()]];
        let statement = free.statements[(round / free_relations.len()) % free.statements.len()];
        let prefix = PREFIXES
            [(round / (free_relations.len() * free.statements.len())) % PREFIXES.len()];
        let entity = free.entities[rng.gen_range(free.entities.len())];
        let text = prefixed(prefix, &realize(statement, entity));
        round += 1;
        if seen.contains(&text) {
            continue;
        }
        seen.push(text.clone());
        candidates.push(Candidate {
            text,
            label: CandidateLabel::Neutral,
            triple: Some(Triple::new(ENTITY1, free.name, entity)),
        });
    }

    rng.shuffle(&mut candidates);
    candidates
}

fn build_instance(
    rng: &mut SplitMix64,
    spec: &GeneratorSpec,
    persona: &GenPersona,
) -> DialogueInstance {
    // Ground truth sticks to a rare entity where possible.
    let rare_positions: Vec<usize> = persona
        .triples
        .iter()
        .enumerate()
        .filter(|&(_, &(_, e))| e != 0)
        .map(|(i, _)| i)
        .collect();
    let gt_position = if rare_positions.is_empty() {
        rng.gen_range(persona.triples.len())
    } else {
        rare_positions[rng.gen_range(rare_positions.len())]
    };
    let (gt_relation, gt_entity) = persona.triples[gt_position];
    let relation = &RELATIONS[gt_relation];
    let gt_text = realize(relation.answer, relation.entities[gt_entity]);

    let mut history = vec![
        TrainingTurn {
            speaker: SpeakerTag::Partner,
            text: String::from(GREETING_PARTNER),
        },
        TrainingTurn {
            speaker: SpeakerTag::Agent,
            text: String::from(GREETING_AGENT),
        },
    ];
    if spec.gt_reuses_history {
        // Ask, answer, then ask again: the reply restates the agent's own
        // earlier statement.
        history.push(TrainingTurn {
            speaker: SpeakerTag::Partner,
            text: String::from(relation.question),
        });
        history.push(TrainingTurn {
            speaker: SpeakerTag::Agent,
            text: gt_text.clone(),
        });
        history.push(TrainingTurn {
            speaker: SpeakerTag::Partner,
            text: format!("{REPEAT_PREFIX} {}", relation.question),
        });
    } else {
        // Usually warm up with a question about another persona relation.
        let other_positions: Vec<usize> =
            (0..persona.triples.len()).filter(|&p| p != gt_position).collect();
        if !other_positions.is_empty() && rng.next_f64() < 0.75 {
            let warm_position = other_positions[rng.gen_range(other_positions.len())];
            let (warm_relation, warm_entity) = persona.triples[warm_position];
            let warm = &RELATIONS[warm_relation];
            let warm_template = if rng.next_f64() < spec.eager_rate {
                EAGER_TEMPLATE
            } else {
                warm.answer
            };
            history.push(TrainingTurn {
                speaker: SpeakerTag::Partner,
                text: String::from(warm.question),
            });
            history.push(TrainingTurn {
                speaker: SpeakerTag::Agent,
                text: realize(warm_template, warm.entities[warm_entity]),
            });
        }
        history.push(TrainingTurn {
            speaker: SpeakerTag::Partner,
            text: String::from(relation.question),
        });
    }

    let candidates = build_candidates(rng, spec, persona, gt_position, &gt_text);
    DialogueInstance {
        persona: persona.sentences.clone(),
        history,
        gt: gt_text,
        candidates,
    }
}

/// One dialogue per relation touching every entity and template, plus one for
/// the conversational filler; keeps the corpus vocabulary closed over
/// everything the generator can ever render.
fn coverage_dialogues() -> Vec<TrainingDialogue> {
    let mut dialogues = Vec::new();
    for relation in &RELATIONS {
        let mut turns = vec![
            TrainingTurn {
                speaker: SpeakerTag::Partner,
                text: String::from(relation.question),
            },
            TrainingTurn {
                speaker: SpeakerTag::Agent,
                text: realize(relation.answer, relation.entities[0]),
            },
        ];
        for (i, statement) in relation.statements.iter().enumerate() {
            turns.push(TrainingTurn {
                speaker: SpeakerTag::Agent,
                text: realize(statement, relation.entities[i + 1]),
            });
        }
        dialogues.push(TrainingDialogue {
            condition: Vec::new(),
            turns,
        });
    }
    dialogues.push(TrainingDialogue {
        condition: Vec::new(),
        turns: vec![
            TrainingTurn {
                speaker: SpeakerTag::Partner,
                text: String::from(GREETING_PARTNER),
            },
            TrainingTurn {
                speaker: SpeakerTag::Agent,
                text: String::from(GREETING_AGENT),
            },
            TrainingTurn {
                speaker: SpeakerTag::Agent,
                text: realize(EAGER_TEMPLATE, RELATIONS[0].entities[0]),
            },
            TrainingTurn {
                speaker: SpeakerTag::Agent,
                text: format!("well you know honestly {REPEAT_PREFIX}"),
            },
        ],
    });
    dialogues
}

/// Generate the persona table, both splits, and the speaker corpus.
/// Deterministic under the seed.
pub fn generate_dataset(spec: &GeneratorSpec, seed: u64) -> Result<GeneratedData, HarnessError> {
    spec.validate()?;
    let mut rng = SplitMix64::new(seed);

    let mut table: Vec<GenPersona> = Vec::with_capacity(spec.personas);
    let mut attempts = 0usize;
    while table.len() < spec.personas {
        let persona = sample_persona(&mut rng, spec);
        let duplicate = table.iter().any(|p| p.sentences == persona.sentences);
        if duplicate {
            attempts += 1;
            if attempts > 200 * spec.personas {
                return Err(HarnessError::InsufficientInventory(
                    "could not sample the requested number of distinct personas",
                ));
            }
            continue;
        }
        table.push(persona);
    }

    let mut train = Vec::with_capacity(spec.train_instances);
    for _ in 0..spec.train_instances {
        let persona = &table[rng.gen_range(table.len())];
        train.push(build_instance(&mut rng, spec, persona));
    }

    let mut eval = Vec::with_capacity(spec.eval_instances);
    for _ in 0..spec.eval_instances {
        let persona = sample_persona_with_rare_entity(&mut rng, spec);
        eval.push(build_instance(&mut rng, spec, &persona));
    }

    let mut corpus = coverage_dialogues();
    corpus.extend(train.iter().map(|instance| instance.to_training_dialogue()));

    Ok(GeneratedData {
        train,
        eval,
        corpus,
        persona_table: table.iter().map(|p| p.condition()).collect(),
    })
}

/// Entity word -> relation name; grounds triple extraction from generated
/// text. Entity words are globally unique across relations by construction.
#[derive(Debug, Clone, Default)]
pub struct TripleLexicon {
    entity_to_relation: BTreeMap<String, String>,
}

impl TripleLexicon {
    pub fn relation_of(&self, entity: &str) -> Option<&str> {
        self.entity_to_relation.get(entity).map(String::as_str)
    }
}

/// The lexicon of the built-in inventory.
pub fn default_lexicon() -> TripleLexicon {
    let mut entity_to_relation = BTreeMap::new();
    for relation in &RELATIONS {
        for entity in &relation.entities {
            entity_to_relation.insert(String::from(*entity), String::from(relation.name));
        }
    }
    TripleLexicon { entity_to_relation }
}

/// Triples grounded by an utterance: one per distinct entity word found.
pub fn extract_triples(tokens: &[String], lexicon: &TripleLexicon) -> Vec<Triple> {
    let mut triples: Vec<Triple> = Vec::new();
    for token in tokens {
        if let Some(relation) = lexicon.relation_of(token) {
            let triple = Triple::new(ENTITY1, relation, token);
            if !triples.contains(&triple) {
                triples.push(triple);
            }
        }
    }
    triples
}
