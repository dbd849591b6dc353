//! Character experience extraction.
//!
//! One experience per (character, sentence) pair: the sentence's open-class
//! context words, an OBJ separator, then the entity words (the subject's
//! headword, that headword's object when present, and the character surface).
//! Surfaces are kept verbatim; vocabulary lowercasing happens later.

use serde::{Deserialize, Serialize};

use crate::corpus::characters::{sentence_subject, Character};
use crate::corpus::conllu::ParseToken;
use crate::corpus::story::Story;
use crate::corpus::vocab::OBJ_TOKEN;
use crate::error::{CosegError, Result};

/// Open-class tags that qualify as context words. Pronouns, determiners and
/// adpositions are deliberately outside this set.
const CONTEXT_POS: [&str; 4] = ["VERB", "NOUN", "PROPN", "ADJ"];

/// Object-relation preference for "the corresponding object" of the headword:
/// direct object first, then indirect, then clausal complements.
const OBJECT_PREFERENCE: [&[&str]; 3] = [&["obj", "dobj"], &["iobj"], &["ccomp", "xcomp"]];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterExperience {
    pub sentence_index: usize,
    pub context_words: Vec<String>,
    pub entity_words: Vec<String>,
}

impl CharacterExperience {
    /// context ++ [OBJ] ++ entity.
    pub fn merged(&self) -> Vec<String> {
        let mut out = self.context_words.clone();
        out.push(OBJ_TOKEN.to_string());
        out.extend(self.entity_words.iter().cloned());
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExperienceSequence {
    pub character: Character,
    pub experiences: Vec<CharacterExperience>,
}

impl ExperienceSequence {
    pub fn s(&self) -> usize {
        self.experiences.len()
    }
}

fn deprel_base(deprel: &str) -> &str {
    deprel.split(':').next().unwrap_or(deprel)
}

fn object_of(parse: &[ParseToken], head_index: usize) -> Option<&ParseToken> {
    for class in OBJECT_PREFERENCE {
        let hit = parse
            .iter()
            .find(|t| t.head == head_index && class.contains(&deprel_base(&t.deprel)));
        if hit.is_some() {
            return hit;
        }
    }
    None
}

/// Runs the four extraction steps for the subject at `subject_index`
/// (1-based). The character's own subject token never counts as a context
/// word, so a proper-noun subject does not leak into the background part.
pub fn extract_experience(
    parse: &[ParseToken],
    subject_index: usize,
) -> Result<CharacterExperience> {
    let subject = parse
        .iter()
        .find(|t| t.index == subject_index)
        .ok_or_else(|| CosegError::InvalidInput(format!("no token at index {subject_index}")))?;
    if subject.head == 0 {
        return Err(CosegError::InvalidInput(format!(
            "subject {:?} is the sentence root; headword missing",
            subject.surface
        )));
    }
    let headword = parse.iter().find(|t| t.index == subject.head).ok_or_else(|| {
        CosegError::InvalidInput(format!(
            "headword index {} of subject {:?} does not exist",
            subject.head, subject.surface
        ))
    })?;

    let context_words: Vec<String> = parse
        .iter()
        .filter(|t| t.index != subject.index && CONTEXT_POS.contains(&t.upos.as_str()))
        .map(|t| t.surface.clone())
        .collect();

    let mut entity_words = vec![headword.surface.clone()];
    if let Some(object) = object_of(parse, headword.index) {
        entity_words.push(object.surface.clone());
    }
    entity_words.push(subject.surface.clone());

    if context_words.iter().chain(&entity_words).any(|w| w == OBJ_TOKEN) {
        return Err(CosegError::InvalidInput(format!(
            "sentence contains the reserved separator token {OBJ_TOKEN:?}"
        )));
    }
    Ok(CharacterExperience {
        sentence_index: 0,
        context_words,
        entity_words,
    })
}

/// One chronological sequence per character, in the characters' given order.
pub fn build_experience_sequences(
    story: &Story,
    characters: &[Character],
) -> Result<Vec<ExperienceSequence>> {
    let mut sequences = Vec::with_capacity(characters.len());
    for character in characters {
        let mut experiences = Vec::with_capacity(character.sentence_indices.len());
        for &idx in &character.sentence_indices {
            let parse = &story.parses[idx];
            let subject = sentence_subject(parse).ok_or_else(|| {
                CosegError::InvalidInput(format!(
                    "story {:?} sentence {idx}: character {:?} recorded as subject but none found",
                    story.id, character.canonical_id
                ))
            })?;
            let mut exp = extract_experience(parse, subject.index)?;
            exp.sentence_index = idx;
            experiences.push(exp);
        }
        sequences.push(ExperienceSequence { character: character.clone(), experiences });
    }
    Ok(sequences)
}

/// Flat serializable form for the experiences JSONL output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperienceRecord {
    pub story_id: String,
    pub character_id: String,
    pub s: usize,
    pub merged: Vec<Vec<String>>,
}

pub fn experience_records(story: &Story, characters: &[Character]) -> Result<Vec<ExperienceRecord>> {
    let sequences = build_experience_sequences(story, characters)?;
    Ok(sequences
        .iter()
        .map(|seq| ExperienceRecord {
            story_id: story.id.clone(),
            character_id: seq.character.canonical_id.clone(),
            s: seq.s(),
            merged: seq.experiences.iter().map(|e| e.merged()).collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::identify_characters;
    use crate::corpus::story::{load_stories_jsonl, write_stories_jsonl};
    use crate::testsupport::{fig1_story, tok};
    use tempfile::tempdir;

    /// "She knew a discount store near her sold socks", with store as the
    /// object constituent of knew.
    pub(crate) fn discount_store_parse() -> Vec<ParseToken> {
        vec![
            tok(1, "She", "PRON", 2, "nsubj"),
            tok(2, "knew", "VERB", 0, "root"),
            tok(3, "a", "DET", 5, "det"),
            tok(4, "discount", "NOUN", 5, "compound"),
            tok(5, "store", "NOUN", 2, "obj"),
            tok(6, "near", "ADP", 7, "case"),
            tok(7, "her", "PRON", 5, "nmod"),
            tok(8, "sold", "VERB", 2, "ccomp"),
            tok(9, "socks", "NOUN", 8, "obj"),
        ]
    }

    #[test]
    fn golden_discount_store_example() {
        let exp = extract_experience(&discount_store_parse(), 1).unwrap();
        assert_eq!(
            exp.merged(),
            vec!["knew", "discount", "store", "sold", "socks", "OBJ", "knew", "store", "She"]
        );
        assert_eq!(exp.context_words, vec!["knew", "discount", "store", "sold", "socks"]);
        assert_eq!(exp.entity_words, vec!["knew", "store", "She"]);
    }

    #[test]
    fn tom_slept_has_no_object() {
        let parse = vec![
            tok(1, "Tom", "PROPN", 2, "nsubj"),
            tok(2, "slept", "VERB", 0, "root"),
            tok(3, ".", "PUNCT", 2, "punct"),
        ];
        let exp = extract_experience(&parse, 1).unwrap();
        assert_eq!(exp.entity_words, vec!["slept", "Tom"]);
        assert_eq!(exp.merged(), vec!["slept", "OBJ", "slept", "Tom"]);
    }

    #[test]
    fn headword_duplication_is_permitted() {
        // The golden example already shares "knew" and "store" between the
        // context and entity parts; this checks it explicitly.
        let exp = extract_experience(&discount_store_parse(), 1).unwrap();
        let merged = exp.merged();
        assert_eq!(merged.iter().filter(|w| *w == "knew").count(), 2);
        assert_eq!(merged.iter().filter(|w| *w == "OBJ").count(), 1);
    }

    #[test]
    fn root_subject_is_malformed() {
        let parse = vec![tok(1, "Tom", "PROPN", 0, "root")];
        assert!(extract_experience(&parse, 1).is_err());
    }

    #[test]
    fn fig1_sequences_are_chronological_and_complete() {
        let story = fig1_story();
        let characters = identify_characters(&story);
        let sequences = build_experience_sequences(&story, &characters).unwrap();

        let by_id = |id: &str| sequences.iter().find(|s| s.character.canonical_id == id).unwrap();
        assert_eq!(by_id("i").s(), 2);
        assert_eq!(by_id("son").s(), 1);
        assert_eq!(by_id("car").s(), 1);

        for seq in &sequences {
            let idxs: Vec<usize> = seq.experiences.iter().map(|e| e.sentence_index).collect();
            assert!(idxs.windows(2).all(|w| w[0] < w[1]), "non-chronological: {idxs:?}");
            for e in &seq.experiences {
                assert_eq!(e.merged().iter().filter(|w| *w == "OBJ").count(), 1);
                assert!(!e.merged().is_empty());
            }
        }

        let pair_count: usize = sequences.iter().map(ExperienceSequence::s).sum();
        let subject_sentences = story
            .parses
            .iter()
            .filter(|p| crate::corpus::sentence_subject(p).is_some())
            .count();
        assert_eq!(pair_count, subject_sentences);
    }

    #[test]
    fn son_experience_covers_the_pea_gravel() {
        let story = fig1_story();
        let characters = identify_characters(&story);
        let sequences = build_experience_sequences(&story, &characters).unwrap();
        let son = sequences.iter().find(|s| s.character.canonical_id == "son").unwrap();
        let merged = son.experiences[0].merged();
        assert!(merged.contains(&"lying".to_string()), "{merged:?}");
        assert!(merged.contains(&"gravel".to_string()), "{merged:?}");
        assert_eq!(merged.last().unwrap(), "son");
    }

    #[test]
    fn serialization_roundtrip_preserves_extraction() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("stories.jsonl");
        let story = fig1_story();
        let characters = identify_characters(&story);
        let before: Vec<Vec<Vec<String>>> = build_experience_sequences(&story, &characters)
            .unwrap()
            .iter()
            .map(|s| s.experiences.iter().map(|e| e.merged()).collect())
            .collect();

        write_stories_jsonl(&path, &[story]).unwrap();
        let reloaded = load_stories_jsonl(&path).unwrap();
        let characters = identify_characters(&reloaded[0]);
        let after: Vec<Vec<Vec<String>>> = build_experience_sequences(&reloaded[0], &characters)
            .unwrap()
            .iter()
            .map(|s| s.experiences.iter().map(|e| e.merged()).collect())
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn object_preference_prefers_direct_over_clausal() {
        // Both an obj and a ccomp attach to the root; obj wins even when the
        // ccomp comes first in surface order.
        let parse = vec![
            tok(1, "He", "PRON", 2, "nsubj"),
            tok(2, "said", "VERB", 0, "root"),
            tok(3, "go", "VERB", 2, "ccomp"),
            tok(4, "words", "NOUN", 2, "obj"),
        ];
        let exp = extract_experience(&parse, 1).unwrap();
        assert_eq!(exp.entity_words, vec!["said", "words", "He"]);
    }

    #[test]
    fn experience_records_flatten_sequences() {
        let story = fig1_story();
        let characters = identify_characters(&story);
        let records = experience_records(&story, &characters).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].story_id, "fig1");
        assert_eq!(records[0].character_id, "i");
        assert_eq!(records[0].s, 2);
        assert_eq!(records[0].merged.len(), 2);
    }
}
