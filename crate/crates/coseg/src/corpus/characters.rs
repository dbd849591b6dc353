//! Character identification: the subject of each context sentence, gated by
//! part of speech, merged across sentences by a small coreference rule.

use std::collections::BTreeSet;

use super::conllu::ParseToken;
use super::story::Story;

/// Forms that all merge into the single first-person character "i".
pub const FIRST_PERSON_FORMS: [&str; 4] = ["i", "me", "my", "mine"];

const SUBJECT_POS: [&str; 3] = ["NOUN", "PROPN", "PRON"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Character {
    pub canonical_id: String,
    pub surface_forms: BTreeSet<String>,
    /// Context sentence indices where this character is the subject,
    /// strictly increasing.
    pub sentence_indices: Vec<usize>,
}

fn is_subject_relation(deprel: &str) -> bool {
    let base = deprel.split(':').next().unwrap_or(deprel);
    base == "nsubj" || base == "nsubjpass"
}

/// The sentence's subject: the leftmost nsubj-type dependent of the root with
/// an acceptable part of speech. Expletives and clausal subjects never match.
pub fn sentence_subject(parse: &[ParseToken]) -> Option<&ParseToken> {
    sentence_subject_with(parse, true)
}

pub fn sentence_subject_with(parse: &[ParseToken], include_common_nouns: bool) -> Option<&ParseToken> {
    let root = parse.iter().find(|t| t.head == 0)?;
    parse.iter().find(|t| {
        t.head == root.index
            && is_subject_relation(&t.deprel)
            && SUBJECT_POS.contains(&t.upos.as_str())
            && (include_common_nouns || t.upos != "NOUN")
    })
}

/// Merge key: first-person forms collapse to "i", everything else keys on the
/// lowercased lemma.
pub fn canonical_key(token: &ParseToken) -> String {
    let lowered = token.surface.to_lowercase();
    if FIRST_PERSON_FORMS.contains(&lowered.as_str()) {
        "i".to_string()
    } else {
        token.lemma.to_lowercase()
    }
}

pub fn identify_characters(story: &Story) -> Vec<Character> {
    identify_characters_with(story, true)
}

/// One `Character` per distinct canonical subject, in first-appearance order.
/// `include_common_nouns = false` restricts characters to proper nouns and
/// pronouns.
pub fn identify_characters_with(story: &Story, include_common_nouns: bool) -> Vec<Character> {
    let mut characters: Vec<Character> = Vec::new();
    for (idx, parse) in story.parses.iter().enumerate() {
        let Some(subject) = sentence_subject_with(parse, include_common_nouns) else {
            continue;
        };
        let key = canonical_key(subject);
        match characters.iter_mut().find(|c| c.canonical_id == key) {
            Some(c) => {
                c.surface_forms.insert(subject.surface.clone());
                c.sentence_indices.push(idx);
            }
            None => characters.push(Character {
                canonical_id: key,
                surface_forms: BTreeSet::from([subject.surface.clone()]),
                sentence_indices: vec![idx],
            }),
        }
    }
    characters
}

/// The ending's subject resolved against the context characters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroundTruth {
    /// Index into the `identify_characters` list.
    Known { character: usize },
    /// The ending has a subject, but no context character matches; its
    /// experience count is 0.
    Unseen { id: String, surface: String },
    /// No extractable ending subject; also counts as 0.
    NoSubject,
}

pub fn ground_truth_character(story: &Story, characters: &[Character]) -> GroundTruth {
    let Some(subject) = sentence_subject(&story.ending_parse) else {
        return GroundTruth::NoSubject;
    };
    let key = canonical_key(subject);
    match characters.iter().position(|c| c.canonical_id == key) {
        Some(i) => GroundTruth::Known { character: i },
        None => GroundTruth::Unseen { id: key, surface: subject.surface.clone() },
    }
}

/// Experience count of the story's ground-truth character.
pub fn ground_truth_count(gt: &GroundTruth, characters: &[Character]) -> usize {
    match gt {
        GroundTruth::Known { character } => characters[*character].sentence_indices.len(),
        _ => 0,
    }
}
