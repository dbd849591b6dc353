//! CoNLL-U ingestion: 10-column records, blank-line sentence separation.
//!
//! Structural problems (wrong column count, unparseable indices, heads out of
//! range) are hard errors carrying the line number. Tree-level problems
//! (cycles, zero or multiple roots) reject only the offending sentence and
//! surface as warnings, so one bad parse does not sink a whole corpus file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CosegError, Result};

/// One token of a dependency parse. `index` is 1-based; `head` 0 means root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseToken {
    pub index: usize,
    pub surface: String,
    pub lemma: String,
    pub upos: String,
    pub head: usize,
    pub deprel: String,
}

/// Sentences in file order. Rejected sentences stay as `None` placeholders so
/// downstream story chunking keeps its alignment.
#[derive(Debug, Default)]
pub struct ConlluLoad {
    pub sentences: Vec<Option<Vec<ParseToken>>>,
    pub warnings: Vec<String>,
}

impl ConlluLoad {
    pub fn valid(&self) -> impl Iterator<Item = &Vec<ParseToken>> {
        self.sentences.iter().flatten()
    }

    pub fn valid_count(&self) -> usize {
        self.valid().count()
    }
}

/// Single root reachable from every token, no cycles.
pub fn validate_tree(tokens: &[ParseToken]) -> std::result::Result<(), String> {
    let roots = tokens.iter().filter(|t| t.head == 0).count();
    if roots == 0 {
        return Err("no root token".to_string());
    }
    if roots > 1 {
        return Err(format!("{roots} root tokens, expected exactly one"));
    }
    for start in tokens {
        let mut hops = 0;
        let mut at = start.index;
        while at != 0 {
            at = tokens[at - 1].head;
            hops += 1;
            if hops > tokens.len() {
                return Err(format!("cyclic heads reachable from token {}", start.index));
            }
        }
    }
    Ok(())
}

pub fn load_conllu(path: &Path) -> Result<ConlluLoad> {
    let text = fs::read_to_string(path).map_err(|e| CosegError::io(path, e))?;
    parse_conllu(&text, &path.display().to_string())
}

/// Parses CoNLL-U text; `file_label` appears in diagnostics.
pub fn parse_conllu(text: &str, file_label: &str) -> Result<ConlluLoad> {
    let mut load = ConlluLoad::default();
    let mut current: Vec<ParseToken> = Vec::new();
    let mut sentence_start_line = 0usize;

    let malformed = |line_no: usize, message: String| CosegError::Malformed {
        file: file_label.to_string(),
        line: line_no,
        message,
    };

    let finish =
        |current: &mut Vec<ParseToken>, start_line: usize, load: &mut ConlluLoad| -> Result<()> {
            if current.is_empty() {
                return Ok(());
            }
            let tokens = std::mem::take(current);
            for t in &tokens {
                if t.head > tokens.len() {
                    return Err(malformed(
                        start_line,
                        format!(
                            "token {} ({:?}) has head {} in a {}-token sentence",
                            t.index,
                            t.surface,
                            t.head,
                            tokens.len()
                        ),
                    ));
                }
            }
            match validate_tree(&tokens) {
                Ok(()) => load.sentences.push(Some(tokens)),
                Err(why) => {
                    load.warnings.push(format!(
                        "{file_label}: sentence starting at line {start_line} rejected: {why}"
                    ));
                    load.sentences.push(None);
                }
            }
            Ok(())
        };

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            finish(&mut current, sentence_start_line, &mut load)?;
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split('\t').collect();
        if cols.len() != 10 {
            return Err(malformed(line_no, format!("expected 10 columns, found {}", cols.len())));
        }
        // Multiword ranges (1-2) and empty nodes (1.1) carry no tree structure.
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        if current.is_empty() {
            sentence_start_line = line_no;
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| malformed(line_no, format!("bad token index {:?}", cols[0])))?;
        if index != current.len() + 1 {
            return Err(malformed(
                line_no,
                format!("token index {index} out of sequence, expected {}", current.len() + 1),
            ));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| malformed(line_no, format!("bad head index {:?}", cols[6])))?;
        current.push(ParseToken {
            index,
            surface: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            head,
            deprel: cols[7].to_string(),
        });
    }
    finish(&mut current, sentence_start_line, &mut load)?;
    Ok(load)
}
