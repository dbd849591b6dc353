//! Data model and ingestion: parses, stories, characters, vocabulary, splits.

pub mod characters;
pub mod conllu;
pub mod embeddings;
pub mod splits;
pub mod story;
pub mod vocab;

pub use characters::{
    canonical_key, ground_truth_character, ground_truth_count, identify_characters,
    identify_characters_with, sentence_subject, Character, GroundTruth, FIRST_PERSON_FORMS,
};
pub use conllu::{load_conllu, parse_conllu, validate_tree, ConlluLoad, ParseToken};
pub use embeddings::load_pretrained_embeddings;
pub use splits::{build_splits, SplitConfig, Splits};
pub use story::{load_stories_jsonl, stories_from_conllu, write_stories_jsonl, Story};
pub use vocab::{Vocabulary, BOS, EOS, OBJ, OBJ_TOKEN, PAD, UNK};
