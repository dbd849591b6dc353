//! Shared builders for unit tests: hand-written parses stay in one place so
//! fixture drift cannot split across modules.

use crate::corpus::conllu::ParseToken;
use crate::corpus::story::Story;

pub fn tok(index: usize, surface: &str, upos: &str, head: usize, deprel: &str) -> ParseToken {
    ParseToken {
        index,
        surface: surface.to_string(),
        lemma: surface.to_lowercase(),
        upos: upos.to_string(),
        head,
        deprel: deprel.to_string(),
    }
}

pub fn story_from_parses(
    id: &str,
    parses: Vec<Vec<ParseToken>>,
    ending_parse: Vec<ParseToken>,
) -> Story {
    let surfaces = |p: &[ParseToken]| p.iter().map(|t| t.surface.clone()).collect::<Vec<_>>();
    let story = Story {
        id: id.to_string(),
        sentences: parses.iter().map(|p| surfaces(p)).collect(),
        ending: surfaces(&ending_parse),
        parses,
        ending_parse,
    };
    story.validate().expect("test story must validate");
    story
}

/// The car-accident story: context subjects I, son, car, I; the ground-truth
/// ending is about the first person.
pub fn fig1_story() -> Story {
    let s1 = vec![
        tok(1, "I", "PRON", 2, "nsubj"),
        tok(2, "ran", "VERB", 0, "root"),
        tok(3, "and", "CCONJ", 4, "cc"),
        tok(4, "climbed", "VERB", 2, "conj"),
        tok(5, "over", "ADP", 7, "case"),
        tok(6, "the", "DET", 7, "det"),
        tok(7, "fence", "NOUN", 4, "obl"),
        tok(8, ".", "PUNCT", 2, "punct"),
    ];
    let s2 = vec![
        tok(1, "My", "PRON", 2, "nmod:poss"),
        tok(2, "son", "NOUN", 4, "nsubj"),
        tok(3, "was", "AUX", 4, "aux"),
        tok(4, "lying", "VERB", 0, "root"),
        tok(5, "in", "ADP", 8, "case"),
        tok(6, "the", "DET", 8, "det"),
        tok(7, "pea", "NOUN", 8, "compound"),
        tok(8, "gravel", "NOUN", 4, "obl"),
        tok(9, ".", "PUNCT", 4, "punct"),
    ];
    let s3 = vec![
        tok(1, "The", "DET", 2, "det"),
        tok(2, "car", "NOUN", 4, "nsubj"),
        tok(3, "had", "AUX", 4, "aux"),
        tok(4, "swerved", "VERB", 0, "root"),
        tok(5, "just", "ADV", 7, "advmod"),
        tok(6, "in", "ADP", 7, "case"),
        tok(7, "time", "NOUN", 4, "obl"),
        tok(8, ".", "PUNCT", 4, "punct"),
    ];
    let s4 = vec![
        tok(1, "I", "PRON", 2, "nsubj"),
        tok(2, "raged", "VERB", 0, "root"),
        tok(3, "at", "ADP", 5, "case"),
        tok(4, "the", "DET", 5, "det"),
        tok(5, "driver", "NOUN", 2, "obl"),
        tok(6, ".", "PUNCT", 2, "punct"),
    ];
    let ending = vec![
        tok(1, "I", "PRON", 2, "nsubj"),
        tok(2, "called", "VERB", 0, "root"),
        tok(3, "911", "NUM", 2, "obj"),
        tok(4, ".", "PUNCT", 2, "punct"),
    ];
    story_from_parses("fig1", vec![s1, s2, s3, s4], ending)
}
