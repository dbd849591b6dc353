//! Vocabulary with fixed reserved ids and frequency-then-lexicographic
//! ordering. Lowercasing happens here, at the token-to-id boundary, never
//! during extraction: extracted experiences keep their original surfaces.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{CosegError, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const BOS: u32 = 2;
pub const EOS: u32 = 3;
pub const OBJ: u32 = 4;

/// The experience separator keeps its exact uppercase surface.
pub const OBJ_TOKEN: &str = "OBJ";

const RESERVED: [&str; 5] = ["<pad>", "<unk>", "<bos>", "<eos>", OBJ_TOKEN];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
    counts: Vec<u64>,
}

impl Vocabulary {
    /// Builds from token streams (train split only). Tokens rarer than
    /// `min_count` are dropped and later map to UNK.
    pub fn build<'a, I>(streams: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut freq: HashMap<String, u64> = HashMap::new();
        let mut total = 0usize;
        for stream in streams {
            for raw in stream {
                total += 1;
                let token = normalize(raw);
                if RESERVED.contains(&token.as_str()) {
                    continue;
                }
                *freq.entry(token).or_insert(0) += 1;
            }
        }
        if total == 0 {
            return Err(CosegError::InvalidInput("empty corpus for vocabulary".into()));
        }
        let mut kept: Vec<(String, u64)> =
            freq.into_iter().filter(|(_, c)| *c >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut vocab = Vocabulary::reserved_only();
        for (token, count) in kept {
            let id = vocab.id_to_token.len() as u32;
            vocab.token_to_id.insert(token.clone(), id);
            vocab.id_to_token.push(token);
            vocab.counts.push(count);
        }
        Ok(vocab)
    }

    fn reserved_only() -> Self {
        let id_to_token: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let token_to_id =
            id_to_token.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocabulary { token_to_id, id_to_token, counts: vec![0; RESERVED.len()] }
    }

    /// Lookup with UNK fallback. OBJ is matched case-sensitively; all other
    /// tokens are lowercased first.
    pub fn id_of(&self, token: &str) -> u32 {
        let normalized = normalize(token);
        self.token_to_id.get(&normalized).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.id_to_token[id as usize]
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(&normalize(token))
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id_of(t)).collect()
    }

    /// token TAB id TAB count, one line per id in ascending order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (id, token) in self.id_to_token.iter().enumerate() {
            out.push_str(&format!("{token}\t{id}\t{}\n", self.counts[id]));
        }
        fs::write(path, out).map_err(|e| CosegError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CosegError::io(path, e))?;
        let mut vocab = Vocabulary {
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
            counts: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            let malformed = |message: String| CosegError::Malformed {
                file: path.display().to_string(),
                line: i + 1,
                message,
            };
            let mut cols = line.split('\t');
            let (token, id, count) = match (cols.next(), cols.next(), cols.next(), cols.next()) {
                (Some(t), Some(i), Some(c), None) => (t, i, c),
                _ => return Err(malformed("expected token<TAB>id<TAB>count".into())),
            };
            let id: u32 = id.parse().map_err(|_| malformed(format!("bad id {id:?}")))?;
            if id as usize != vocab.id_to_token.len() {
                return Err(malformed(format!("id {id} out of sequence")));
            }
            let count: u64 = count.parse().map_err(|_| malformed(format!("bad count {count:?}")))?;
            vocab.token_to_id.insert(token.to_string(), id);
            vocab.id_to_token.push(token.to_string());
            vocab.counts.push(count);
        }
        for (id, expected) in RESERVED.iter().enumerate() {
            if vocab.id_to_token.get(id).map(String::as_str) != Some(*expected) {
                return Err(CosegError::Malformed {
                    file: path.display().to_string(),
                    line: id + 1,
                    message: format!("reserved token {expected:?} missing at id {id}"),
                });
            }
        }
        Ok(vocab)
    }
}

fn normalize(token: &str) -> String {
    if token == OBJ_TOKEN {
        token.to_string()
    } else {
        token.to_lowercase()
    }
}
