//! Corpus-level BLEU with clipped n-gram counts and a single reference per
//! candidate.
//!
//! Counts are pooled over the whole corpus before dividing, the standard
//! corpus-level definition. `bleu_n` is the cumulative score (geometric mean
//! of precisions up to n); `bleu_n_individual` reports only the n-gram
//! precision under the same brevity penalty. No smoothing: a zero precision
//! zeroes the cumulative score. An order where the corpus has no candidate
//! n-grams at all (every sentence shorter than n) is vacuous and skipped,
//! which keeps the identity property `bleu_n(x, x, n) = 100` on degenerate
//! short corpora.

use std::collections::HashMap;

use crate::error::{CosegError, Result};

fn ngram_counts<'a>(tokens: &'a [String], n: usize) -> HashMap<&'a [String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Pooled clipped matches and candidate i-gram total across the corpus.
fn clipped_counts(
    candidates: &[Vec<String>],
    references: &[Vec<String>],
    i: usize,
) -> (u64, u64) {
    let mut matched = 0u64;
    let mut total = 0u64;
    for (cand, reference) in candidates.iter().zip(references) {
        let ref_counts = ngram_counts(reference, i);
        for (gram, &count) in &ngram_counts(cand, i) {
            matched += count.min(ref_counts.get(gram).copied().unwrap_or(0));
        }
        total += cand.len().saturating_sub(i - 1) as u64;
    }
    (matched, total)
}

/// 1 when the candidate corpus is longer than the reference corpus,
/// otherwise `e^(1 - r/c)`.
fn brevity_penalty(c: u64, r: u64) -> f64 {
    if c >= r {
        1.0
    } else if c == 0 {
        0.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    }
}

fn validate(candidates: &[Vec<String>], references: &[Vec<String>], n: usize) -> Result<()> {
    if !(1..=3).contains(&n) {
        return Err(CosegError::InvalidInput(format!("BLEU order {n} must be 1, 2, or 3")));
    }
    if candidates.is_empty() {
        return Err(CosegError::InvalidInput("BLEU over an empty corpus".into()));
    }
    if candidates.len() != references.len() {
        return Err(CosegError::InvalidInput(format!(
            "{} candidates vs {} references",
            candidates.len(),
            references.len()
        )));
    }
    Ok(())
}

fn corpus_lengths(candidates: &[Vec<String>], references: &[Vec<String>]) -> (u64, u64) {
    (
        candidates.iter().map(|t| t.len() as u64).sum(),
        references.iter().map(|t| t.len() as u64).sum(),
    )
}

/// Cumulative corpus BLEU-n as a percentage in [0, 100].
pub fn bleu_n(candidates: &[Vec<String>], references: &[Vec<String>], n: usize) -> Result<f64> {
    validate(candidates, references, n)?;
    let (c, r) = corpus_lengths(candidates, references);
    let mut log_sum = 0.0;
    let mut orders = 0u32;
    for i in 1..=n {
        let (matched, total) = clipped_counts(candidates, references, i);
        if total == 0 {
            continue;
        }
        if matched == 0 {
            return Ok(0.0);
        }
        log_sum += (matched as f64 / total as f64).ln();
        orders += 1;
    }
    let precision = if orders == 0 { 1.0 } else { (log_sum / orders as f64).exp() };
    Ok(100.0 * brevity_penalty(c, r) * precision)
}

/// Individual-precision variant: brevity penalty times the n-gram precision
/// alone.
pub fn bleu_n_individual(
    candidates: &[Vec<String>],
    references: &[Vec<String>],
    n: usize,
) -> Result<f64> {
    validate(candidates, references, n)?;
    let (c, r) = corpus_lengths(candidates, references);
    let (matched, total) = clipped_counts(candidates, references, n);
    if total == 0 {
        return Ok(100.0 * brevity_penalty(c, r));
    }
    Ok(100.0 * brevity_penalty(c, r) * matched as f64 / total as f64)
}
