//! Story data model and the JSONL interchange format: one story per line,
//! tokenized sentences plus inline parse arrays, self-contained for fixtures.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::conllu::{ConlluLoad, ParseToken};
use crate::error::{CosegError, Result};

/// A four-sentence context (any l >= 1 is accepted), its ending, and one
/// dependency parse per sentence including the ending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Story {
    pub id: String,
    pub sentences: Vec<Vec<String>>,
    pub ending: Vec<String>,
    pub parses: Vec<Vec<ParseToken>>,
    pub ending_parse: Vec<ParseToken>,
}

impl Story {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| {
            Err(CosegError::InvalidInput(format!("story {:?}: {msg}", self.id)))
        };
        if self.sentences.is_empty() {
            return fail("no context sentences".into());
        }
        if self.parses.len() != self.sentences.len() {
            return fail(format!(
                "{} parses for {} sentences",
                self.parses.len(),
                self.sentences.len()
            ));
        }
        for (i, (sent, parse)) in self.sentences.iter().zip(&self.parses).enumerate() {
            if sent.len() != parse.len() {
                return fail(format!(
                    "sentence {i} has {} tokens but its parse has {}",
                    sent.len(),
                    parse.len()
                ));
            }
        }
        if self.ending.len() != self.ending_parse.len() {
            return fail(format!(
                "ending has {} tokens but its parse has {}",
                self.ending.len(),
                self.ending_parse.len()
            ));
        }
        Ok(())
    }
}

pub fn load_stories_jsonl(path: &Path) -> Result<Vec<Story>> {
    let text = fs::read_to_string(path).map_err(|e| CosegError::io(path, e))?;
    let mut stories = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let story: Story = serde_json::from_str(line).map_err(|e| CosegError::Malformed {
            file: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        story.validate()?;
        stories.push(story);
    }
    Ok(stories)
}

pub fn write_stories_jsonl(path: &Path, stories: &[Story]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| CosegError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for story in stories {
        serde_json::to_writer(&mut out, story)
            .map_err(|e| CosegError::InvalidInput(format!("serializing {:?}: {e}", story.id)))?;
        out.write_all(b"\n").map_err(|e| CosegError::io(path, e))?;
    }
    out.flush().map_err(|e| CosegError::io(path, e))
}

/// Chunks parsed sentences into stories of `per_story` sentences, the last one
/// being the ending. Stories containing a rejected sentence are skipped with a
/// warning; a trailing partial chunk is a hard error.
pub fn stories_from_conllu(
    load: &ConlluLoad,
    per_story: usize,
    id_prefix: &str,
) -> Result<(Vec<Story>, Vec<String>)> {
    if per_story < 2 {
        return Err(CosegError::InvalidInput(
            "need at least 2 sentences per story (context + ending)".into(),
        ));
    }
    if load.sentences.len() % per_story != 0 {
        return Err(CosegError::InvalidInput(format!(
            "{} sentences do not divide into stories of {per_story}",
            load.sentences.len()
        )));
    }
    let mut stories = Vec::new();
    let mut warnings = load.warnings.clone();
    for (n, chunk) in load.sentences.chunks(per_story).enumerate() {
        let id = format!("{id_prefix}{n:05}");
        if chunk.iter().any(Option::is_none) {
            warnings.push(format!("story {id} skipped: contains a rejected sentence"));
            continue;
        }
        let parses: Vec<Vec<ParseToken>> =
            chunk[..per_story - 1].iter().map(|s| s.clone().unwrap()).collect();
        let ending_parse = chunk[per_story - 1].clone().unwrap();
        let surfaces =
            |p: &[ParseToken]| p.iter().map(|t| t.surface.clone()).collect::<Vec<_>>();
        let story = Story {
            id,
            sentences: parses.iter().map(|p| surfaces(p)).collect(),
            ending: surfaces(&ending_parse),
            parses,
            ending_parse,
        };
        story.validate()?;
        stories.push(story);
    }
    Ok((stories, warnings))
}
