//! Pretrained embedding loader: whitespace text format, one token followed by
//! its vector per line. Rows for vocabulary tokens are copied; everything the
//! file does not cover keeps a seeded random initialization, so the resulting
//! matrix is reproducible for a fixed (file, vocab, dim, seed).

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CosegError, Result};
use crate::numerics::{uniform_tensor, Shape, Tensor};

use super::vocab::Vocabulary;

pub const INIT_BOUND: f64 = 0.08;

pub fn load_pretrained_embeddings(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<Tensor> {
    let text = fs::read_to_string(path).map_err(|e| CosegError::io(path, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrix =
        uniform_tensor(&mut rng, Shape::Matrix { rows: vocab.len(), cols: dim }, INIT_BOUND);

    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| CosegError::Malformed {
            file: path.display().to_string(),
            line: i + 1,
            message,
        };
        let mut fields = line.split_whitespace();
        let token = fields.next().ok_or_else(|| malformed("missing token".into()))?;
        let values: Vec<f64> = fields
            .map(|f| f.parse::<f64>().map_err(|_| malformed(format!("bad float {f:?}"))))
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(malformed(format!(
                "token {token:?} has {} dimensions, expected {dim}",
                values.len()
            )));
        }
        if !vocab.contains(token) {
            continue;
        }
        let id = vocab.id_of(token) as usize;
        let row_start = id * dim;
        matrix.data_mut()[row_start..row_start + dim].copy_from_slice(&values);
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn vocab_of(tokens: &[&str]) -> Vocabulary {
        let stream: Vec<String> =
            tokens.iter().flat_map(|t| [t.to_string(), t.to_string()]).collect();
        Vocabulary::build([stream.as_slice()], 2).unwrap()
    }

    #[test]
    fn covered_token_row_is_copied() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        fs::write(&path, "a 0.1 0.2\n").unwrap();
        let vocab = vocab_of(&["a"]);
        let emb = load_pretrained_embeddings(&path, &vocab, 2, 3).unwrap();
        let id = vocab.id_of("a") as usize;
        assert_eq!(emb.row(id), &[0.1, 0.2]);
    }

    #[test]
    fn missing_token_row_is_seeded_and_reproducible() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        fs::write(&path, "other 0.5 0.5\n").unwrap();
        let vocab = vocab_of(&["a"]);
        let e1 = load_pretrained_embeddings(&path, &vocab, 2, 3).unwrap();
        let e2 = load_pretrained_embeddings(&path, &vocab, 2, 3).unwrap();
        let id = vocab.id_of("a") as usize;
        assert_eq!(e1.row(id), e2.row(id));
        assert!(e1.row(id).iter().all(|v| v.abs() <= INIT_BOUND));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        fs::write(&path, "a 0.1 0.2 0.3\n").unwrap();
        let vocab = vocab_of(&["a"]);
        let err = load_pretrained_embeddings(&path, &vocab, 2, 3).unwrap_err();
        assert!(err.to_string().contains("3 dimensions"), "{err}");
    }

    #[test]
    fn matrix_shape_matches_vocab_and_dim() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        fs::write(&path, "").unwrap();
        let vocab = vocab_of(&["a", "b"]);
        let emb = load_pretrained_embeddings(&path, &vocab, 4, 3).unwrap();
        assert_eq!(emb.shape(), Shape::Matrix { rows: vocab.len(), cols: 4 });
    }
}
