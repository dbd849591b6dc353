//! Automatic metrics (perplexity, BLEU, success rate) and
//! generation-for-all-characters reporting.

pub mod bleu;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::characters::{
    ground_truth_character, identify_characters, Character, GroundTruth, FIRST_PERSON_FORMS,
};
use crate::corpus::story::Story;
use crate::corpus::vocab::Vocabulary;
use crate::error::{CosegError, Result};
use crate::extraction::build_experience_sequences;
use crate::model::{CosegModel, ExampleInput};
use crate::training::{examples_for_split, make_train_example, validate_ppl};

pub use bleu::{bleu_n, bleu_n_individual};

/// Character id marking a story whose ending has no extractable subject.
pub const NO_TARGET: &str = "<none>";

const EOS_SURFACE: &str = "<eos>";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub story_id: String,
    /// Canonical id of the character the ending was generated for;
    /// [`NO_TARGET`] when the story's ending has no subject.
    pub character_id: String,
    /// Experience count of that character.
    pub s: usize,
    pub used_fallback: bool,
    /// Decoded surface tokens; ends with `<eos>` unless the length cap hit.
    pub generated: Vec<String>,
    /// Vocabulary-normalized ground-truth ending; present when this record
    /// is for the story's ending character.
    pub reference: Option<Vec<String>>,
    /// (canonical id, lowercased surface forms) for every character of the
    /// story; subject resolution scans these.
    pub known_surfaces: Vec<(String, Vec<String>)>,
}

impl GenerationRecord {
    /// Tokens for metrics: the trailing end marker dropped.
    pub fn content_tokens(&self) -> &[String] {
        match self.generated.last() {
            Some(last) if last == EOS_SURFACE => &self.generated[..self.generated.len() - 1],
            _ => &self.generated,
        }
    }

    pub fn has_target(&self) -> bool {
        self.character_id != NO_TARGET
    }
}

fn surfaces(vocab: &Vocabulary, ids: &[u32]) -> Vec<String> {
    ids.iter().map(|&id| vocab.token(id).to_string()).collect()
}

/// Ending tokens pushed through the vocabulary, so rare words compare as
/// `<unk>` on both sides of BLEU.
fn normalized_ending(story: &Story, vocab: &Vocabulary) -> Vec<String> {
    surfaces(vocab, &vocab.ids(&story.ending))
}

fn known_surfaces(characters: &[Character]) -> Vec<(String, Vec<String>)> {
    characters
        .iter()
        .map(|c| {
            let mut forms: Vec<String> = c.surface_forms.iter().map(|s| s.to_lowercase()).collect();
            forms.dedup();
            if !forms.contains(&c.canonical_id) {
                forms.push(c.canonical_id.clone());
            }
            (c.canonical_id.clone(), forms)
        })
        .collect()
}

/// Subject of a generated ending without a parse: the first of the first
/// three tokens matching any known character surface wins; failing that, a
/// first-person form resolves to "i". A possessive opener like "My son"
/// therefore resolves to the named character, not the narrator.
pub fn resolve_subject(tokens: &[String], known: &[(String, Vec<String>)]) -> Option<String> {
    let window: Vec<String> = tokens.iter().take(3).map(|t| t.to_lowercase()).collect();
    for token in &window {
        for (id, forms) in known {
            if forms.iter().any(|f| f == token) {
                return Some(id.clone());
            }
        }
    }
    for token in &window {
        if FIRST_PERSON_FORMS.contains(&token.as_str()) {
            return Some("i".to_string());
        }
    }
    None
}

/// Fraction of records whose generated ending is about its target
/// character. Unresolvable endings count as failures.
pub fn success_rate(records: &[&GenerationRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(CosegError::InvalidInput("success rate over no records".into()));
    }
    let hits = records
        .iter()
        .filter(|r| {
            resolve_subject(r.content_tokens(), &r.known_surfaces).as_deref()
                == Some(r.character_id.as_str())
        })
        .count();
    Ok(hits as f64 / records.len() as f64)
}

/// One ending per identified context character, each generated from that
/// character's own experience chain. The reference travels with the record
/// of the story's ending character.
pub fn generate_all(
    model: &CosegModel,
    story: &Story,
    vocab: &Vocabulary,
) -> Result<Vec<GenerationRecord>> {
    let characters = identify_characters(story);
    let gt = ground_truth_character(story, &characters);
    let sequences = build_experience_sequences(story, &characters)?;
    let known = known_surfaces(&characters);
    let context_ids: Vec<Vec<u32>> = story.sentences.iter().map(|s| vocab.ids(s)).collect();
    let reference = normalized_ending(story, vocab);

    let mut records = Vec::with_capacity(characters.len());
    for (idx, (character, seq)) in characters.iter().zip(&sequences).enumerate() {
        let experience_ids: Vec<Vec<u32>> =
            seq.experiences.iter().map(|e| vocab.ids(&e.merged())).collect();
        let input = ExampleInput {
            context: &context_ids,
            experiences: &experience_ids,
            char_token: vocab.id_of(&character.canonical_id),
        };
        let out = model.forward().generate(&input);
        let is_target = matches!(gt, GroundTruth::Known { character: c } if c == idx);
        records.push(GenerationRecord {
            story_id: story.id.clone(),
            character_id: character.canonical_id.clone(),
            s: seq.s(),
            used_fallback: out.used_fallback,
            generated: surfaces(vocab, &out.tokens),
            reference: is_target.then(|| reference.clone()),
            known_surfaces: known.clone(),
        });
    }
    Ok(records)
}

/// The record metrics are computed from: the ending generated for the
/// story's ground-truth character (fallback path when that character never
/// acts in the context).
pub fn target_record(
    model: &CosegModel,
    story: &Story,
    vocab: &Vocabulary,
) -> Result<GenerationRecord> {
    let characters = identify_characters(story);
    let gt = ground_truth_character(story, &characters);
    let ex = make_train_example(story, vocab)?;
    let out = model.forward().generate(&ex.input());
    let mut known = known_surfaces(&characters);
    let character_id = match &gt {
        GroundTruth::Known { character } => characters[*character].canonical_id.clone(),
        GroundTruth::Unseen { id, surface } => {
            known.push((id.clone(), vec![surface.to_lowercase(), id.clone()]));
            id.clone()
        }
        GroundTruth::NoSubject => NO_TARGET.to_string(),
    };
    Ok(GenerationRecord {
        story_id: story.id.clone(),
        character_id,
        s: ex.s(),
        used_fallback: out.used_fallback,
        generated: surfaces(vocab, &out.tokens),
        reference: Some(normalized_ending(story, vocab)),
        known_surfaces: known,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MetricsCounts {
    pub stories: usize,
    /// Records generated through the no-experience fallback.
    pub fallback: usize,
    /// Records with a target character, the success-rate pool.
    pub sucr_pool: usize,
}

#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub split: String,
    pub model: String,
    pub ppl: f64,
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub sucr: f64,
    pub counts: MetricsCounts,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "split,model,ppl,bleu1,bleu2,bleu3,sucr";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.split, self.model, self.ppl, self.bleu1, self.bleu2, self.bleu3, self.sucr
        )
    }

    pub fn table(&self) -> String {
        format!(
            "split {} | model {}\n  PPL     {:>10.4}\n  BLEU-1  {:>10.4}\n  BLEU-2  {:>10.4}\n  BLEU-3  {:>10.4}\n  SucR    {:>10.4}  ({} of {} stories in pool, {} fallback)",
            self.split,
            self.model,
            self.ppl,
            self.bleu1,
            self.bleu2,
            self.bleu3,
            self.sucr,
            self.counts.sucr_pool,
            self.counts.stories,
            self.counts.fallback,
        )
    }
}

/// Teacher-forced perplexity plus greedy-decoding BLEU and success rate
/// over one split. `individual_bleu` switches to per-order precision
/// instead of the cumulative geometric mean.
pub fn evaluate_split(
    model: &CosegModel,
    stories: &[Story],
    split_ids: &[String],
    vocab: &Vocabulary,
    split_name: &str,
    individual_bleu: bool,
) -> Result<(MetricsReport, Vec<GenerationRecord>)> {
    let by_id: HashMap<&str, &Story> = stories.iter().map(|s| (s.id.as_str(), s)).collect();
    let ppl = validate_ppl(model, &examples_for_split(stories, split_ids, vocab)?)?;

    let mut records = Vec::with_capacity(split_ids.len());
    for id in split_ids {
        let story = by_id
            .get(id.as_str())
            .ok_or_else(|| CosegError::InvalidInput(format!("split references unknown story {id:?}")))?;
        records.push(target_record(model, story, vocab)?);
    }

    let candidates: Vec<Vec<String>> =
        records.iter().map(|r| r.content_tokens().to_vec()).collect();
    let references: Vec<Vec<String>> = records
        .iter()
        .map(|r| r.reference.clone().expect("target records always carry the reference"))
        .collect();
    let score = if individual_bleu { bleu_n_individual } else { bleu_n };
    let bleu1 = score(&candidates, &references, 1)?;
    let bleu2 = score(&candidates, &references, 2)?;
    let bleu3 = score(&candidates, &references, 3)?;

    let pool: Vec<&GenerationRecord> = records.iter().filter(|r| r.has_target()).collect();
    let sucr = if pool.is_empty() { 0.0 } else { success_rate(&pool)? };

    let counts = MetricsCounts {
        stories: records.len(),
        fallback: records.iter().filter(|r| r.used_fallback).count(),
        sucr_pool: pool.len(),
    };
    let report = MetricsReport {
        split: split_name.to_string(),
        model: model.config.model_label(),
        ppl,
        bleu1,
        bleu2,
        bleu3,
        sucr,
        counts,
    };
    Ok((report, records))
}
