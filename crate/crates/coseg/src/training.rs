//! Training loop: batch planning, teacher-forced loss, momentum updates,
//! validation perplexity tracking, and checkpointing.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::characters::{ground_truth_character, identify_characters, GroundTruth};
use crate::corpus::story::Story;
use crate::corpus::vocab::{Vocabulary, BOS, EOS, UNK};
use crate::error::{CosegError, Result};
use crate::extraction::build_experience_sequences;
use crate::model::{CosegModel, ExampleInput, ModelConfig};
use crate::numerics::{
    clip_gradients, load_checkpoint, momentum_sgd_step, save_checkpoint, zero_velocity,
    Checkpoint, GradSet, TrainMeta, Velocity,
};

pub const BEST_CHECKPOINT: &str = "best.ck";
pub const LAST_CHECKPOINT: &str = "last.ck";
pub const TRAIN_LOG: &str = "train_log.csv";

/// Consecutive skipped updates tolerated before the run is declared diverged.
const MAX_SKIP_STREAK: u32 = 3;

#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    /// `0.0` is allowed as a frozen-parameter diagnostic.
    pub lr: f64,
    pub momentum: f64,
    pub clip_norm: f64,
    pub epochs: u64,
    pub batch_size: usize,
    pub seed: u64,
    /// Non-improving validation epochs tolerated before early stop.
    pub patience: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.1,
            momentum: 0.9,
            clip_norm: 5.0,
            epochs: 10,
            batch_size: 32,
            seed: 7,
            patience: 2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CosegError::Config(msg));
        if !self.lr.is_finite() || self.lr < 0.0 {
            return fail(format!("lr {} must be finite and non-negative", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail(format!("momentum {} must be in [0, 1)", self.momentum));
        }
        if !self.clip_norm.is_finite() || self.clip_norm <= 0.0 {
            return fail(format!("clip_norm {} must be positive", self.clip_norm));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.patience == 0 {
            return fail("patience must be at least 1".into());
        }
        Ok(())
    }
}

/// One story reduced to token ids for its ground-truth character.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainExample {
    pub story_id: String,
    pub context: Vec<Vec<u32>>,
    /// Merged experience token lists, chronological; empty when the ending
    /// subject never acts in the context.
    pub experiences: Vec<Vec<u32>>,
    pub char_token: u32,
    /// BOS ++ ending ++ EOS.
    pub frame: Vec<u32>,
}

impl TrainExample {
    pub fn s(&self) -> usize {
        self.experiences.len()
    }

    fn context_tokens(&self) -> usize {
        self.context.iter().map(Vec::len).sum()
    }

    pub fn input(&self) -> ExampleInput<'_> {
        ExampleInput {
            context: &self.context,
            experiences: &self.experiences,
            char_token: self.char_token,
        }
    }
}

/// Builds the training view of a story around its ground-truth character.
/// Unseen or missing ending subjects yield an empty experience list (the
/// fallback path); the character token degrades to UNK when no subject
/// exists at all.
pub fn make_train_example(story: &Story, vocab: &Vocabulary) -> Result<TrainExample> {
    let characters = identify_characters(story);
    let (experiences, char_token) = match ground_truth_character(story, &characters) {
        GroundTruth::Known { character } => {
            let sequences = build_experience_sequences(story, &characters)?;
            let merged: Vec<Vec<u32>> = sequences[character]
                .experiences
                .iter()
                .map(|e| vocab.ids(&e.merged()))
                .collect();
            (merged, vocab.id_of(&characters[character].canonical_id))
        }
        GroundTruth::Unseen { id, .. } => (Vec::new(), vocab.id_of(&id)),
        GroundTruth::NoSubject => (Vec::new(), UNK),
    };
    let mut frame = vec![BOS];
    frame.extend(vocab.ids(&story.ending));
    frame.push(EOS);
    Ok(TrainExample {
        story_id: story.id.clone(),
        context: story.sentences.iter().map(|s| vocab.ids(s)).collect(),
        experiences,
        char_token,
        frame,
    })
}

/// Examples for a split, in the split's id order.
pub fn examples_for_split(
    stories: &[Story],
    split_ids: &[String],
    vocab: &Vocabulary,
) -> Result<Vec<TrainExample>> {
    let by_id: HashMap<&str, &Story> = stories.iter().map(|s| (s.id.as_str(), s)).collect();
    split_ids
        .iter()
        .map(|id| {
            let story = by_id
                .get(id.as_str())
                .ok_or_else(|| CosegError::InvalidInput(format!("split references unknown story {id:?}")))?;
            make_train_example(story, vocab)
        })
        .collect()
}

/// Deterministic per-epoch batch plan. Examples are ordered by context
/// length (ties by story id), shuffled within buckets of eight batches so
/// batch members have similar lengths, then the batch order is shuffled.
pub fn plan_batches(
    examples: &[TrainExample],
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Vec<Vec<usize>> {
    assert!(batch_size > 0, "batch_size must be positive");
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.sort_by(|&a, &b| {
        (examples[a].context_tokens(), examples[a].story_id.as_str())
            .cmp(&(examples[b].context_tokens(), examples[b].story_id.as_str()))
    });
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ epoch.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    for chunk in order.chunks_mut(batch_size * 8) {
        chunk.shuffle(&mut rng);
    }
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(|c| c.to_vec()).collect();
    batches.shuffle(&mut rng);
    batches
}

/// Teacher-forced perplexity pooled over all target tokens:
/// `exp(total NLL / total token count)`. No parameter updates.
pub fn validate_ppl(model: &CosegModel, examples: &[TrainExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(CosegError::InvalidInput("validation set is empty".into()));
    }
    let mut total_nll = 0.0;
    let mut total_tokens = 0usize;
    for ex in examples {
        let mut fwd = model.forward();
        let out = fwd.example_loss(&ex.input(), &ex.frame);
        total_nll += fwd.tape.value(out.mean_loss).data()[0] * out.token_count as f64;
        total_tokens += out.token_count;
    }
    Ok((total_nll / total_tokens as f64).exp())
}

#[derive(Clone, Copy, Debug)]
pub struct EpochLog {
    pub epoch: u64,
    pub train_loss: f64,
    pub val_ppl: f64,
    /// Rate the epoch's updates actually used (before any halving).
    pub lr: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub best_ppl: f64,
    pub stopped_early: bool,
    pub log: Vec<EpochLog>,
}

/// Owns the model and all mutable training state, so a checkpoint of a
/// `Trainer` resumes bit-for-bit.
pub struct Trainer {
    pub model: CosegModel,
    pub config: TrainConfig,
    pub velocity: Velocity,
    pub lr: f64,
    /// Fully completed epochs.
    pub epoch: u64,
    pub best_ppl: f64,
    pub bad_epochs: u64,
    skip_streak: u32,
}

impl Trainer {
    pub fn new(model: CosegModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let velocity = zero_velocity(&model.params);
        Ok(Trainer {
            model,
            config,
            velocity,
            lr: config.lr,
            epoch: 0,
            best_ppl: f64::INFINITY,
            bad_epochs: 0,
            skip_streak: 0,
        })
    }

    /// Restores a trainer from a checkpoint written by [`Trainer::save`].
    /// The model config must fingerprint-match and the seed must agree, or
    /// the resumed run could not reproduce the uninterrupted one.
    pub fn resume(model_config: ModelConfig, config: TrainConfig, path: &Path) -> Result<Self> {
        config.validate()?;
        let ck = load_checkpoint(path)?;
        let expected = crate::numerics::config_fingerprint(&model_config.canonical_string());
        if ck.config_hash != expected {
            return Err(CosegError::Checkpoint(format!(
                "config hash {:#018x} does not match current config {expected:#018x}",
                ck.config_hash
            )));
        }
        if ck.meta.seed != config.seed {
            return Err(CosegError::Checkpoint(format!(
                "checkpoint seed {} differs from configured seed {}",
                ck.meta.seed, config.seed
            )));
        }
        let model = CosegModel::from_parts(model_config, ck.params)?;
        Ok(Trainer {
            model,
            config,
            velocity: ck.velocity,
            lr: ck.meta.lr,
            epoch: ck.meta.epoch,
            best_ppl: ck.meta.best_ppl,
            bad_epochs: ck.meta.bad_epochs,
            skip_streak: 0,
        })
    }

    fn meta(&self) -> TrainMeta {
        TrainMeta {
            epoch: self.epoch,
            lr: self.lr,
            best_ppl: self.best_ppl,
            bad_epochs: self.bad_epochs,
            seed: self.config.seed,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ck = Checkpoint {
            config_hash: self.model.fingerprint(),
            params: self.model.params.clone(),
            velocity: self.velocity.clone(),
            meta: self.meta(),
        };
        save_checkpoint(path, &ck)
    }

    fn record_skip(&mut self) -> Result<()> {
        self.skip_streak += 1;
        if self.skip_streak >= MAX_SKIP_STREAK {
            Err(CosegError::Diverged(format!(
                "{MAX_SKIP_STREAK} consecutive batches produced non-finite gradients"
            )))
        } else {
            Ok(())
        }
    }

    /// One update over a batch: per-example backward passes, gradients
    /// averaged across the batch, clipped, then one momentum step. Returns
    /// the pre-update mean loss. A batch with non-finite gradients is
    /// skipped (parameters untouched); three consecutive skips abort.
    pub fn train_step(&mut self, batch: &[&TrainExample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(CosegError::InvalidInput("empty training batch".into()));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut grads: Option<GradSet> = None;
        let mut loss_sum = 0.0;
        for ex in batch {
            let mut fwd = self.model.forward();
            let out = fwd.example_loss(&ex.input(), &ex.frame);
            loss_sum += fwd.tape.value(out.mean_loss).data()[0];
            fwd.tape.backward(out.mean_loss);
            let example_grads = fwd.grads(&self.model.params);
            match grads.as_mut() {
                None => {
                    let mut g = example_grads;
                    for v in g.values_mut() {
                        for x in v.iter_mut() {
                            *x *= scale;
                        }
                    }
                    grads = Some(g);
                }
                Some(total) => {
                    for (name, g) in example_grads {
                        let acc = total.get_mut(&name).expect("stable parameter names");
                        for (a, x) in acc.iter_mut().zip(g) {
                            *a += scale * x;
                        }
                    }
                }
            }
        }
        let mean_loss = loss_sum * scale;
        let mut grads = grads.expect("non-empty batch");

        // Non-finite gradients must be caught before clipping: an infinite
        // norm would otherwise rescale the batch to zeros and look healthy.
        if grads.values().flatten().any(|v| !v.is_finite()) {
            self.record_skip()?;
            return Ok(mean_loss);
        }
        clip_gradients(&mut grads, self.config.clip_norm);
        match momentum_sgd_step(
            &mut self.model.params,
            &mut self.velocity,
            &grads,
            self.lr,
            self.config.momentum,
        ) {
            Ok(()) => {
                self.skip_streak = 0;
                Ok(mean_loss)
            }
            Err(CosegError::NonFiniteGradient(_)) => {
                self.record_skip()?;
                Ok(mean_loss)
            }
            Err(e) => Err(e),
        }
    }

    /// Epoch loop with per-epoch validation. Keeps the best-PPL checkpoint,
    /// halves the rate on non-improving epochs, stops early after
    /// `patience` of them in a row. With `epochs = 0` (or a fully resumed
    /// run) this is a no-op. `out_dir`, when given, receives `best.ck`,
    /// `last.ck`, and `train_log.csv`.
    pub fn fit(
        &mut self,
        train: &[TrainExample],
        val: &[TrainExample],
        out_dir: Option<&Path>,
    ) -> Result<FitOutcome> {
        if self.epoch < self.config.epochs && train.is_empty() {
            return Err(CosegError::InvalidInput("training set is empty".into()));
        }
        let mut log = Vec::new();
        let mut stopped_early = false;
        while self.epoch < self.config.epochs {
            let started = Instant::now();
            let lr_used = self.lr;
            let plan = plan_batches(train, self.config.batch_size, self.config.seed, self.epoch);
            let mut loss_weighted = 0.0;
            let mut examples_seen = 0usize;
            for batch_indices in &plan {
                let batch: Vec<&TrainExample> =
                    batch_indices.iter().map(|&i| &train[i]).collect();
                let loss = self.train_step(&batch)?;
                loss_weighted += loss * batch.len() as f64;
                examples_seen += batch.len();
            }
            let train_loss = loss_weighted / examples_seen as f64;
            let val_ppl = validate_ppl(&self.model, val)?;
            self.epoch += 1;
            let improved = val_ppl < self.best_ppl;
            if improved {
                self.best_ppl = val_ppl;
                self.bad_epochs = 0;
            } else {
                self.bad_epochs += 1;
                self.lr *= 0.5;
            }
            if let Some(dir) = out_dir {
                if improved {
                    self.save(&dir.join(BEST_CHECKPOINT))?;
                }
                self.save(&dir.join(LAST_CHECKPOINT))?;
            }
            let row = EpochLog {
                epoch: self.epoch,
                train_loss,
                val_ppl,
                lr: lr_used,
                wall_seconds: started.elapsed().as_secs_f64(),
            };
            if let Some(dir) = out_dir {
                append_log_row(&dir.join(TRAIN_LOG), &row)?;
            }
            log.push(row);
            if !improved && self.bad_epochs >= self.config.patience {
                stopped_early = true;
                break;
            }
        }
        Ok(FitOutcome { best_ppl: self.best_ppl, stopped_early, log })
    }
}

fn append_log_row(path: &Path, row: &EpochLog) -> Result<()> {
    let header_needed = !path.exists();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CosegError::io(path, e))?;
    let io_err = |e| CosegError::io(path, e);
    if header_needed {
        writeln!(file, "epoch,train_loss,val_ppl,lr,wall_seconds").map_err(io_err)?;
    }
    writeln!(
        file,
        "{},{:.6},{:.6},{},{:.3}",
        row.epoch, row.train_loss, row.val_ppl, row.lr, row.wall_seconds
    )
    .map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FusionMode;
    use crate::testsupport::fig1_story;
    use tempfile::tempdir;

    fn tiny_model(seed: u64) -> CosegModel {
        let config = ModelConfig {
            embed_dim: 3,
            hidden_dim: 4,
            breakpoints: vec![0, 2, 4],
            fusion: FusionMode::Vbf,
            vocab_size: 12,
            max_decode_len: 6,
            attention_query: crate::model::AttentionQuery::FinalExperience,
        };
        CosegModel::new(config, seed).unwrap()
    }

    fn example(id: &str, shift: u32) -> TrainExample {
        let t = |v: u32| 5 + (v + shift) % 7;
        TrainExample {
            story_id: id.to_string(),
            context: vec![vec![t(0), t(1)], vec![t(2)]],
            experiences: vec![vec![t(3), t(4)]],
            char_token: t(3),
            frame: vec![BOS, t(5), t(6), EOS],
        }
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.momentum = 1.0;
        assert!(c.validate().is_err());
        c = TrainConfig { batch_size: 0, ..TrainConfig::default() };
        assert!(c.validate().is_err());
        c = TrainConfig { lr: -0.1, ..TrainConfig::default() };
        assert!(c.validate().is_err());
        c = TrainConfig { lr: 0.0, ..TrainConfig::default() };
        assert!(c.validate().is_ok());
    }

    #[test]
    fn fig1_example_wires_ids_and_frame() {
        let story = fig1_story();
        let streams: Vec<Vec<String>> = story
            .sentences
            .iter()
            .chain(std::iter::once(&story.ending))
            .cloned()
            .collect();
        let refs: Vec<&[String]> = streams.iter().map(Vec::as_slice).collect();
        let vocab = Vocabulary::build(refs, 1).unwrap();
        let ex = make_train_example(&story, &vocab).unwrap();
        assert_eq!(ex.context.len(), 4);
        // "i" is the ground-truth character and acts in sentences 0 and 3.
        assert_eq!(ex.s(), 2);
        assert_eq!(ex.char_token, vocab.id_of("i"));
        assert_eq!(ex.frame[0], BOS);
        assert_eq!(*ex.frame.last().unwrap(), EOS);
        assert_eq!(ex.frame.len(), story.ending.len() + 2);
    }

    #[test]
    fn empty_batch_is_rejected() {
        let mut trainer = Trainer::new(tiny_model(1), TrainConfig::default()).unwrap();
        let err = trainer.train_step(&[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn zero_lr_keeps_parameters_and_loss_constant() {
        let config = TrainConfig { lr: 0.0, ..TrainConfig::default() };
        let mut trainer = Trainer::new(tiny_model(2), config).unwrap();
        let before: Vec<Vec<f64>> =
            trainer.model.params.iter().map(|(_, t)| t.data().to_vec()).collect();
        let ex = example("a", 0);
        let l1 = trainer.train_step(&[&ex]).unwrap();
        let l2 = trainer.train_step(&[&ex]).unwrap();
        let l3 = trainer.train_step(&[&ex]).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(l2, l3);
        let after: Vec<Vec<f64>> =
            trainer.model.params.iter().map(|(_, t)| t.data().to_vec()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn identical_examples_average_to_single_example_loss() {
        let ex = example("a", 0);
        let mut one = Trainer::new(tiny_model(3), TrainConfig::default()).unwrap();
        let mut many = Trainer::new(tiny_model(3), TrainConfig::default()).unwrap();
        let single = one.train_step(&[&ex]).unwrap();
        let tripled = many.train_step(&[&ex, &ex, &ex]).unwrap();
        assert!((single - tripled).abs() < 1e-12);
        // Averaged identical gradients match the single-example update too.
        for (name, t) in one.model.params.iter() {
            for (a, b) in t.data().iter().zip(many.model.params.get(name).data()) {
                assert!((a - b).abs() < 1e-12, "{name} diverged");
            }
        }
    }

    #[test]
    fn repeated_steps_on_one_example_reduce_loss() {
        let mut trainer = Trainer::new(tiny_model(4), TrainConfig::default()).unwrap();
        let ex = example("a", 1);
        let first = trainer.train_step(&[&ex]).unwrap();
        let mut last = first;
        for _ in 0..60 {
            last = trainer.train_step(&[&ex]).unwrap();
        }
        assert!(last < first * 0.5, "loss {first} -> {last} did not halve");
    }

    #[test]
    fn untrained_ppl_is_near_vocab_size() {
        let model = tiny_model(5);
        let examples: Vec<TrainExample> = (0..4).map(|i| example(&format!("s{i}"), i)).collect();
        let ppl = validate_ppl(&model, &examples).unwrap();
        let v = model.config.vocab_size as f64;
        assert!((ppl / v - 1.0).abs() < 0.05, "ppl {ppl} vs vocab {v}");
    }

    #[test]
    fn validation_is_deterministic_and_rejects_empty() {
        let model = tiny_model(6);
        let examples = vec![example("a", 0), example("b", 3)];
        let p1 = validate_ppl(&model, &examples).unwrap();
        let p2 = validate_ppl(&model, &examples).unwrap();
        assert_eq!(p1, p2);
        assert!(validate_ppl(&model, &[]).is_err());
    }

    #[test]
    fn plan_covers_every_example_exactly_once() {
        let examples: Vec<TrainExample> =
            (0..25).map(|i| example(&format!("s{i:02}"), i)).collect();
        let plan = plan_batches(&examples, 4, 7, 0);
        let mut seen: Vec<usize> = plan.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..25).collect::<Vec<_>>());
        assert!(plan.iter().all(|b| b.len() <= 4 && !b.is_empty()));
        assert_eq!(plan_batches(&examples, 4, 7, 0), plan);
        assert_ne!(plan_batches(&examples, 4, 7, 1), plan);
    }

    #[test]
    fn skip_streak_aborts_on_third_and_resets_on_success() {
        let mut trainer = Trainer::new(tiny_model(7), TrainConfig::default()).unwrap();
        assert!(trainer.record_skip().is_ok());
        assert!(trainer.record_skip().is_ok());
        let err = trainer.record_skip().unwrap_err();
        assert_eq!(err.exit_code(), 3);

        let mut trainer = Trainer::new(tiny_model(7), TrainConfig::default()).unwrap();
        trainer.record_skip().unwrap();
        let ex = example("a", 0);
        trainer.train_step(&[&ex]).unwrap();
        assert_eq!(trainer.skip_streak, 0);
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let config = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let mut trainer = Trainer::new(tiny_model(8), config).unwrap();
        let before: Vec<Vec<f64>> =
            trainer.model.params.iter().map(|(_, t)| t.data().to_vec()).collect();
        let out = trainer.fit(&[], &[example("v", 0)], None).unwrap();
        assert!(out.log.is_empty());
        let after: Vec<Vec<f64>> =
            trainer.model.params.iter().map(|(_, t)| t.data().to_vec()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn fit_writes_checkpoints_and_log() {
        let dir = tempdir().unwrap();
        let config = TrainConfig { epochs: 2, batch_size: 2, ..TrainConfig::default() };
        let mut trainer = Trainer::new(tiny_model(9), config).unwrap();
        let train: Vec<TrainExample> = (0..6).map(|i| example(&format!("t{i}"), i)).collect();
        let val = vec![example("v0", 2), example("v1", 5)];
        let out = trainer.fit(&train, &val, Some(dir.path())).unwrap();
        assert_eq!(out.log.len() as u64, trainer.epoch);
        assert!(dir.path().join(BEST_CHECKPOINT).exists());
        assert!(dir.path().join(LAST_CHECKPOINT).exists());
        let log_text = std::fs::read_to_string(dir.path().join(TRAIN_LOG)).unwrap();
        assert!(log_text.starts_with("epoch,train_loss,val_ppl,lr,wall_seconds"));
        assert_eq!(log_text.lines().count(), out.log.len() + 1);

        // The best checkpoint reloads to the reported validation PPL.
        let ck = load_checkpoint(&dir.path().join(BEST_CHECKPOINT)).unwrap();
        let restored = CosegModel::from_parts(trainer.model.config.clone(), ck.params).unwrap();
        let ppl = validate_ppl(&restored, &val).unwrap();
        assert!((ppl - out.best_ppl).abs() < 1e-9, "{ppl} vs {}", out.best_ppl);
    }

    #[test]
    fn resume_reproduces_uninterrupted_run() {
        let train: Vec<TrainExample> = (0..6).map(|i| example(&format!("t{i}"), i)).collect();
        let val = vec![example("v0", 2), example("v1", 5)];
        let config = TrainConfig { epochs: 3, batch_size: 2, patience: 10, ..TrainConfig::default() };

        let mut straight = Trainer::new(tiny_model(10), config).unwrap();
        let full = straight.fit(&train, &val, None).unwrap();

        let dir = tempdir().unwrap();
        let two_epochs = TrainConfig { epochs: 2, ..config };
        let mut partial = Trainer::new(tiny_model(10), two_epochs).unwrap();
        partial.fit(&train, &val, Some(dir.path())).unwrap();

        let mut resumed =
            Trainer::resume(partial.model.config.clone(), config, &dir.path().join(LAST_CHECKPOINT))
                .unwrap();
        assert_eq!(resumed.epoch, 2);
        let tail = resumed.fit(&train, &val, None).unwrap();
        assert_eq!(tail.log.len(), 1);
        let expect = full.log.last().unwrap();
        assert!(
            (tail.log[0].val_ppl - expect.val_ppl).abs() < 1e-9,
            "{} vs {}",
            tail.log[0].val_ppl,
            expect.val_ppl
        );
        assert_eq!(tail.log[0].epoch, expect.epoch);
    }

    #[test]
    fn resume_rejects_seed_or_config_drift() {
        let dir = tempdir().unwrap();
        let config = TrainConfig { epochs: 1, ..TrainConfig::default() };
        let mut trainer = Trainer::new(tiny_model(11), config).unwrap();
        trainer
            .fit(&[example("a", 0)], &[example("v", 1)], Some(dir.path()))
            .unwrap();
        let path = dir.path().join(LAST_CHECKPOINT);

        let other_seed = TrainConfig { seed: 99, ..config };
        assert!(Trainer::resume(trainer.model.config.clone(), other_seed, &path).is_err());

        let mut other_config = trainer.model.config.clone();
        other_config.breakpoints = vec![0, 4];
        assert!(Trainer::resume(other_config, config, &path).is_err());
    }

    #[test]
    fn same_seed_produces_identical_logs() {
        let train: Vec<TrainExample> = (0..5).map(|i| example(&format!("t{i}"), i)).collect();
        let val = vec![example("v", 3)];
        let config = TrainConfig { epochs: 2, batch_size: 2, patience: 10, ..TrainConfig::default() };
        let mut a = Trainer::new(tiny_model(12), config).unwrap();
        let mut b = Trainer::new(tiny_model(12), config).unwrap();
        let log_a = a.fit(&train, &val, None).unwrap().log;
        let log_b = b.fit(&train, &val, None).unwrap().log;
        for (x, y) in log_a.iter().zip(&log_b) {
            assert_eq!(x.train_loss, y.train_loss);
            assert_eq!(x.val_ppl, y.val_ppl);
            assert_eq!(x.lr, y.lr);
        }
    }
}
