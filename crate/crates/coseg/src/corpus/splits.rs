//! Split construction around the experience-count rule: stories whose
//! ground-truth character has at least 2 experiences form the sufficient pool
//! (train / validation / sufficient test); everything under 2, including
//! count 0, goes to the inadequate test set.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CosegError, Result};

#[derive(Clone, Copy, Debug)]
pub struct SplitConfig {
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { val_fraction: 0.1, test_fraction: 0.1, seed: 7 }
    }
}

/// Story ids per split; disjoint and jointly exhaustive over the input.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub sufficient_test: Vec<String>,
    pub inadequate_test: Vec<String>,
}

impl Splits {
    pub fn total(&self) -> usize {
        self.train.len()
            + self.validation.len()
            + self.sufficient_test.len()
            + self.inadequate_test.len()
    }
}

/// Partitions `(story_id, experience_count)` pairs, given in corpus order.
/// The sufficient pool is shuffled with the seed before carving off the
/// validation and test slices; sampling is therefore a function of
/// (pool contents in order, seed) only, so appending inadequate-only stories
/// cannot disturb it.
pub fn build_splits(
    counted: &[(String, usize)],
    config: &SplitConfig,
) -> Result<(Splits, Vec<String>)> {
    if !(0.0..1.0).contains(&config.val_fraction)
        || !(0.0..1.0).contains(&config.test_fraction)
        || config.val_fraction + config.test_fraction >= 1.0
    {
        return Err(CosegError::Config(format!(
            "split fractions val={} test={} must be in [0,1) and sum below 1",
            config.val_fraction, config.test_fraction
        )));
    }

    let mut splits = Splits::default();
    let mut warnings = Vec::new();
    let mut sufficient: Vec<String> = Vec::new();
    for (id, count) in counted {
        if *count >= 2 {
            sufficient.push(id.clone());
        } else {
            splits.inadequate_test.push(id.clone());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    sufficient.shuffle(&mut rng);

    let n = sufficient.len();
    let n_test = (n as f64 * config.test_fraction).round() as usize;
    let n_val = (n as f64 * config.val_fraction).round() as usize;
    let mut pool = sufficient.into_iter();
    splits.sufficient_test.extend(pool.by_ref().take(n_test));
    splits.validation.extend(pool.by_ref().take(n_val));
    splits.train.extend(pool);

    if splits.inadequate_test.is_empty() {
        warnings.push("no stories qualify for the inadequate test set".to_string());
    }
    if splits.train.is_empty() {
        warnings.push("train split is empty".to_string());
    }
    Ok((splits, warnings))
}
