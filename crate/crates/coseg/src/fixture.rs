//! Bundled synthetic corpus: 64 template stories with hand-built parses, so
//! every pipeline stage runs offline and deterministically.
//!
//! Story `i` follows pattern `i % 4`, which fixes the ending character's
//! experience count S:
//!
//! ```text
//! i % 4 == 0  ending character acts in sentences 0 and 2   S = 2
//! i % 4 == 1  ending character acts in sentences 0, 1, 3   S = 3
//! i % 4 == 2  ending character acts in sentence 0 only     S = 1
//! i % 4 == 3  ending subject never appears in the context  S = 0
//! ```
//!
//! So the count>=2 (sufficient) pool is exactly the 32 stories with
//! `i % 4 < 2` and the rest are inadequate. With the default split settings
//! (val 0.1, test 0.1) the sizes are train 26, validation 3,
//! sufficient_test 3, inadequate_test 32. Every sentence is
//! "Name verb the noun ." and each ending reuses the noun of the ending
//! character's last experience, so a small model can learn the mapping.

use std::path::Path;

use crate::corpus::conllu::ParseToken;
use crate::corpus::story::{write_stories_jsonl, Story};
use crate::error::Result;

const NAMES: [&str; 8] = ["Anna", "Ben", "Cara", "Dan", "Emma", "Fred", "Gina", "Hugo"];
/// Ending-only subjects for the S = 0 pattern; never context subjects.
const UNSEEN: [&str; 4] = ["Ivan", "Jade", "Kurt", "Lena"];
const VERBS: [&str; 6] = ["opened", "washed", "painted", "fixed", "carried", "moved"];
const NOUNS: [&str; 6] = ["door", "car", "fence", "radio", "box", "lamp"];
const END_VERBS: [&str; 2] = ["kept", "liked"];

pub const FIXTURE_SIZE: usize = 64;

fn svo(subject: &str, verb: &str, noun: &str) -> Vec<ParseToken> {
    let t = |index: usize, surface: &str, upos: &str, head: usize, deprel: &str| ParseToken {
        index,
        surface: surface.to_string(),
        lemma: surface.to_lowercase(),
        upos: upos.to_string(),
        head,
        deprel: deprel.to_string(),
    };
    vec![
        t(1, subject, "PROPN", 2, "nsubj"),
        t(2, verb, "VERB", 0, "root"),
        t(3, "the", "DET", 4, "det"),
        t(4, noun, "NOUN", 2, "obj"),
        t(5, ".", "PUNCT", 2, "punct"),
    ]
}

fn story(i: usize) -> Story {
    let p = NAMES[i % 8];
    let q = NAMES[(i + 3) % 8];
    let q2 = NAMES[(i + 5) % 8];
    let va = VERBS[i % 6];
    let vb = VERBS[(i + 2) % 6];
    let na = NOUNS[i % 6];
    let nb = NOUNS[(i + 4) % 6];
    let ev = END_VERBS[i % 2];

    let (parses, ending_parse) = match i % 4 {
        0 => (
            vec![svo(p, va, na), svo(q, vb, nb), svo(p, vb, na), svo(q, va, nb)],
            svo(p, ev, na),
        ),
        1 => (
            vec![svo(p, va, na), svo(p, vb, na), svo(q, va, nb), svo(p, va, nb)],
            svo(p, ev, nb),
        ),
        2 => (
            vec![svo(p, va, na), svo(q, vb, nb), svo(q, va, na), svo(q, vb, na)],
            svo(p, ev, na),
        ),
        _ => (
            vec![svo(q, va, na), svo(q2, vb, nb), svo(q, vb, na), svo(q2, va, nb)],
            svo(UNSEEN[(i / 4) % 4], ev, na),
        ),
    };

    let surfaces = |p: &[ParseToken]| p.iter().map(|t| t.surface.clone()).collect::<Vec<_>>();
    Story {
        id: format!("fx{i:03}"),
        sentences: parses.iter().map(|p| surfaces(p)).collect(),
        ending: surfaces(&ending_parse),
        parses,
        ending_parse,
    }
}

/// The full 64-story corpus, ids `fx000..fx063`.
pub fn fixture_stories() -> Vec<Story> {
    (0..FIXTURE_SIZE).map(story).collect()
}

/// Writes the corpus in the standard story JSONL format.
pub fn write_fixture(path: &Path) -> Result<()> {
    write_stories_jsonl(path, &fixture_stories())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::characters::{ground_truth_character, ground_truth_count, identify_characters, GroundTruth};
    use crate::corpus::splits::{build_splits, SplitConfig};

    #[test]
    fn corpus_has_64_valid_sequential_stories() {
        let stories = fixture_stories();
        assert_eq!(stories.len(), FIXTURE_SIZE);
        for (i, s) in stories.iter().enumerate() {
            assert_eq!(s.id, format!("fx{i:03}"));
            s.validate().unwrap();
            assert_eq!(s.sentences.len(), 4);
            assert!(s.sentences.iter().all(|sent| sent.len() == 5));
            assert_eq!(s.ending.len(), 5);
        }
    }

    #[test]
    fn experience_counts_follow_the_pattern() {
        for (i, s) in fixture_stories().iter().enumerate() {
            let characters = identify_characters(s);
            let gt = ground_truth_character(s, &characters);
            let count = ground_truth_count(&gt, &characters);
            let expected = [2, 3, 1, 0][i % 4];
            assert_eq!(count, expected, "story {i}");
            match i % 4 {
                3 => assert!(matches!(gt, GroundTruth::Unseen { .. }), "story {i}"),
                _ => assert!(matches!(gt, GroundTruth::Known { .. }), "story {i}"),
            }
        }
    }

    #[test]
    fn default_splits_match_documented_sizes() {
        let stories = fixture_stories();
        let counted: Vec<(String, usize)> = stories
            .iter()
            .map(|s| {
                let characters = identify_characters(s);
                let gt = ground_truth_character(s, &characters);
                (s.id.clone(), ground_truth_count(&gt, &characters))
            })
            .collect();
        let (splits, _) = build_splits(&counted, &SplitConfig::default()).unwrap();
        assert_eq!(splits.train.len(), 26);
        assert_eq!(splits.validation.len(), 3);
        assert_eq!(splits.sufficient_test.len(), 3);
        assert_eq!(splits.inadequate_test.len(), 32);

        // The sufficient pool is exactly the i % 4 < 2 ids.
        let mut pool: Vec<&String> = splits
            .train
            .iter()
            .chain(&splits.validation)
            .chain(&splits.sufficient_test)
            .collect();
        pool.sort();
        let expected: Vec<String> =
            (0..FIXTURE_SIZE).filter(|i| i % 4 < 2).map(|i| format!("fx{i:03}")).collect();
        assert_eq!(pool.into_iter().cloned().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(fixture_stories(), fixture_stories());
    }

    #[test]
    fn ending_nouns_come_from_the_characters_last_experience() {
        for (i, s) in fixture_stories().iter().enumerate() {
            if i % 4 == 3 {
                continue;
            }
            let characters = identify_characters(s);
            let GroundTruth::Known { character } = ground_truth_character(s, &characters) else {
                panic!("story {i} should have a known ending character");
            };
            let last_sentence = *characters[character].sentence_indices.last().unwrap();
            assert_eq!(s.ending[3], s.sentences[last_sentence][3], "story {i}");
        }
    }

    #[test]
    #[ignore = "rewrites the committed corpus; run after changing the templates"]
    fn regenerate_committed_fixture() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/stories64.jsonl");
        write_fixture(Path::new(path)).unwrap();
    }

    #[test]
    fn committed_file_matches_generator() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/stories64.jsonl");
        let committed = std::fs::read(path).expect("fixtures/stories64.jsonl is committed");
        let dir = tempfile::tempdir().unwrap();
        let fresh_path = dir.path().join("stories64.jsonl");
        write_fixture(&fresh_path).unwrap();
        let fresh = std::fs::read(&fresh_path).unwrap();
        assert_eq!(committed, fresh, "regenerate with the fixture command");
    }
}
