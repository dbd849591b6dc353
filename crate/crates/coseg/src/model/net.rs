//! The ending generator network.
//!
//! A forward invocation records: context encoder over the concatenated
//! context (EOS tokens separating sentences), the chained experience encoder
//! whose previous final hidden state seeds both states of the next
//! experience's encoder, candidate fusion (breaking/forming with candidate
//! attention, or the add/cat ablations), and an LSTM decoder whose hidden and
//! cell state start from the fused vector.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::vocab::{BOS, EOS};
use crate::error::{CosegError, Result};
use crate::numerics::{
    config_fingerprint, lstm_step, uniform_tensor, BoundParams, LstmState, ParamSet, Shape, Tape,
    Tensor, ValueId,
};

use super::config::{AttentionQuery, FusionMode, ModelConfig};

pub const INIT_BOUND: f64 = 0.08;

#[derive(Clone, Debug)]
pub struct CosegModel {
    pub config: ModelConfig,
    pub params: ParamSet,
}

impl CosegModel {
    /// Parameter names and shapes implied by a config, in creation order.
    pub fn param_shapes(config: &ModelConfig) -> Vec<(&'static str, Shape)> {
        let (d, h, v) = (config.embed_dim, config.hidden_dim, config.vocab_size);
        let mut shapes = vec![
            ("embed", Shape::Matrix { rows: v, cols: d }),
            ("encoder.w", Shape::Matrix { rows: 4 * h, cols: d + h }),
            ("encoder.b", Shape::Vector { len: 4 * h }),
            ("cmm.w", Shape::Matrix { rows: 4 * h, cols: d + h }),
            ("cmm.b", Shape::Vector { len: 4 * h }),
            ("decoder.w", Shape::Matrix { rows: 4 * h, cols: d + h }),
            ("decoder.b", Shape::Vector { len: 4 * h }),
            ("output.w", Shape::Matrix { rows: v, cols: h }),
            ("output.b", Shape::Vector { len: v }),
            ("fallback.w", Shape::Matrix { rows: h, cols: d }),
            ("fallback.b", Shape::Vector { len: h }),
        ];
        match config.fusion {
            FusionMode::Vbf => {
                let n = config.n_candidates();
                shapes.push(("attn.w", Shape::Matrix { rows: n, cols: 2 * h }));
                shapes.push(("attn.b", Shape::Vector { len: n }));
            }
            FusionMode::Cat => {
                shapes.push(("cat.w", Shape::Matrix { rows: h, cols: 2 * h }));
                shapes.push(("cat.b", Shape::Vector { len: h }));
            }
            FusionMode::Add => {}
        }
        shapes
    }

    /// Fresh model with uniform(-0.08, 0.08) parameters from the seed.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for (name, shape) in Self::param_shapes(&config) {
            params.insert(name, uniform_tensor(&mut rng, shape, INIT_BOUND));
        }
        Ok(CosegModel { config, params })
    }

    /// All-zero parameters; useful for degenerate-case oracles.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut params = ParamSet::new();
        for (name, shape) in Self::param_shapes(&config) {
            let data = vec![0.0; shape.numel()];
            let tensor = match shape {
                Shape::Vector { .. } => Tensor::vector(data),
                Shape::Matrix { rows, cols } => Tensor::matrix(rows, cols, data),
            };
            params.insert(name, tensor);
        }
        Ok(CosegModel { config, params })
    }

    /// Rebuilds a model from loaded parameters, verifying every expected
    /// name and shape.
    pub fn from_parts(config: ModelConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let expected = Self::param_shapes(&config);
        if params.len() != expected.len() {
            return Err(CosegError::Checkpoint(format!(
                "checkpoint has {} parameters, config implies {}",
                params.len(),
                expected.len()
            )));
        }
        for (name, shape) in expected {
            if !params.contains(name) {
                return Err(CosegError::Checkpoint(format!("missing parameter {name:?}")));
            }
            if params.get(name).shape() != shape {
                return Err(CosegError::Checkpoint(format!(
                    "parameter {name:?} has shape {}, expected {shape}",
                    params.get(name).shape()
                )));
            }
        }
        Ok(CosegModel { config, params })
    }

    /// Replaces the embedding table (pretrained vectors).
    pub fn set_embeddings(&mut self, matrix: Tensor) -> Result<()> {
        let expected = Shape::Matrix { rows: self.config.vocab_size, cols: self.config.embed_dim };
        if matrix.shape() != expected {
            return Err(CosegError::Config(format!(
                "embedding matrix is {}, model expects {expected}",
                matrix.shape()
            )));
        }
        *self.params.get_mut("embed") = matrix;
        Ok(())
    }

    pub fn fingerprint(&self) -> u64 {
        config_fingerprint(&self.config.canonical_string())
    }

    /// New recording pass with all parameters bound to a fresh tape.
    pub fn forward(&self) -> Forward<'_> {
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, &self.params);
        Forward { tape, bound, config: &self.config }
    }
}

/// Per-example token ids: context sentences, merged experience sequences in
/// chronological order, and the character token for the no-experience
/// fallback.
#[derive(Clone, Copy, Debug)]
pub struct ExampleInput<'a> {
    pub context: &'a [Vec<u32>],
    pub experiences: &'a [Vec<u32>],
    pub char_token: u32,
}

pub struct ContextEncoding {
    pub final_h: ValueId,
    /// One hidden state per consumed token (sentence tokens plus separators).
    pub states: Vec<ValueId>,
}

pub struct CmmEncoding {
    pub final_h: ValueId,
    /// Final hidden state after each experience, in order.
    pub per_experience: Vec<ValueId>,
    pub used_fallback: bool,
}

pub struct CcaOutput {
    pub r: ValueId,
    pub weights: ValueId,
}

pub struct TeacherLoss {
    pub mean_loss: ValueId,
    pub token_count: usize,
}

pub struct GenerateOutput {
    pub tokens: Vec<u32>,
    pub used_fallback: bool,
}

pub struct Forward<'m> {
    pub tape: Tape,
    bound: BoundParams,
    config: &'m ModelConfig,
}

impl Forward<'_> {
    fn p(&self, name: &str) -> ValueId {
        self.bound.id(name)
    }

    /// Gradients for every parameter of `params` after `tape.backward`.
    pub fn grads(&self, params: &ParamSet) -> crate::numerics::GradSet {
        crate::numerics::collect_grads(&self.tape, &self.bound, params)
    }

    fn zero_vec(&mut self, len: usize) -> ValueId {
        self.tape.leaf(Tensor::vector(vec![0.0; len]))
    }

    fn embed(&mut self, id: u32) -> ValueId {
        assert!(
            (id as usize) < self.config.vocab_size,
            "token id {id} outside vocabulary of {}",
            self.config.vocab_size
        );
        let embed = self.p("embed");
        self.tape.embed_row(embed, id as usize)
    }

    /// Runs one weight set over a token sequence from the given state,
    /// collecting the hidden state after every token.
    fn encode_tokens(
        &mut self,
        w: ValueId,
        b: ValueId,
        ids: &[u32],
        mut state: LstmState,
        states_out: &mut Vec<ValueId>,
    ) -> LstmState {
        for &id in ids {
            let x = self.embed(id);
            state = lstm_step(&mut self.tape, w, b, x, state.h, state.c);
            states_out.push(state.h);
        }
        state
    }

    /// Single pass over all context sentences with EOS separators between
    /// them (none after the last, so a 1-token context yields 1 state).
    pub fn encode_context(&mut self, sentences: &[Vec<u32>]) -> ContextEncoding {
        let total: usize = sentences.iter().map(Vec::len).sum();
        assert!(!sentences.is_empty() && total > 0, "empty context");
        let h = self.config.hidden_dim;
        let (w, b) = (self.p("encoder.w"), self.p("encoder.b"));
        let mut state = LstmState { h: self.zero_vec(h), c: self.zero_vec(h) };
        let mut states = Vec::new();
        for (i, sentence) in sentences.iter().enumerate() {
            state = self.encode_tokens(w, b, sentence, state, &mut states);
            if i + 1 < sentences.len() {
                state = self.encode_tokens(w, b, &[EOS], state, &mut states);
            }
        }
        ContextEncoding { final_h: state.h, states }
    }

    /// Chained experience encoding: experience 1 starts from zeros, each
    /// later experience starts with hidden and cell state set to the previous
    /// experience's final hidden state. One shared weight set throughout.
    pub fn run_cmm(&mut self, experiences: &[Vec<u32>]) -> CmmEncoding {
        assert!(!experiences.is_empty(), "run_cmm needs at least one experience");
        let h = self.config.hidden_dim;
        let (w, b) = (self.p("cmm.w"), self.p("cmm.b"));
        let mut carry: Option<ValueId> = None;
        let mut per_experience = Vec::with_capacity(experiences.len());
        for tokens in experiences {
            assert!(!tokens.is_empty(), "experience token list must be non-empty");
            let init = match carry {
                None => LstmState { h: self.zero_vec(h), c: self.zero_vec(h) },
                Some(prev) => LstmState { h: prev, c: prev },
            };
            let mut sink = Vec::new();
            let state = self.encode_tokens(w, b, tokens, init, &mut sink);
            per_experience.push(state.h);
            carry = Some(state.h);
        }
        CmmEncoding { final_h: *per_experience.last().unwrap(), per_experience, used_fallback: false }
    }

    /// Character-token embedding projected to the hidden size; the stand-in
    /// representation when no experience exists.
    pub fn fallback_rep(&mut self, char_token: u32) -> ValueId {
        let e = self.embed(char_token);
        let wx = self.tape.matvec(self.p("fallback.w"), e);
        self.tape.add(wx, self.p("fallback.b"))
    }

    /// Experience-based representation, or the flagged fallback for S = 0.
    pub fn character_state(&mut self, experiences: &[Vec<u32>], char_token: u32) -> CmmEncoding {
        if experiences.is_empty() {
            let rep = self.fallback_rep(char_token);
            CmmEncoding { final_h: rep, per_experience: Vec::new(), used_fallback: true }
        } else {
            self.run_cmm(experiences)
        }
    }

    fn attention_query(&self, cmm: &CmmEncoding) -> ValueId {
        match self.config.attention_query {
            AttentionQuery::FinalExperience => cmm.final_h,
            AttentionQuery::Experience { index } => cmm
                .per_experience
                .get(index.saturating_sub(1))
                .copied()
                .unwrap_or(cmm.final_h),
        }
    }

    /// Candidates at the configured breakpoints; the character vector is the
    /// first (left-part) vector.
    pub fn vbf_candidates(&mut self, char_rep: ValueId, ctx: ValueId) -> Vec<ValueId> {
        self.config
            .breakpoints
            .clone()
            .into_iter()
            .map(|k| self.tape.form_join(char_rep, ctx, k))
            .collect()
    }

    /// Softmax attention over candidates, queried by [character ; context].
    pub fn cca_attend(
        &mut self,
        query_char: ValueId,
        ctx: ValueId,
        candidates: &[ValueId],
    ) -> CcaOutput {
        assert_eq!(
            candidates.len(),
            self.config.n_candidates(),
            "candidate count does not match attention size"
        );
        let x = self.tape.concat(query_char, ctx);
        let wx = self.tape.matvec(self.p("attn.w"), x);
        let logits = self.tape.add(wx, self.p("attn.b"));
        let weights = self.tape.softmax(logits);
        let r = self.tape.weighted_sum(weights, candidates);
        CcaOutput { r, weights }
    }

    /// Decoder initial state under the configured fusion mode.
    pub fn fuse(&mut self, char_rep: ValueId, query_char: ValueId, ctx: ValueId) -> ValueId {
        match self.config.fusion {
            FusionMode::Add => self.tape.add(char_rep, ctx),
            FusionMode::Cat => {
                let x = self.tape.concat(char_rep, ctx);
                let wx = self.tape.matvec(self.p("cat.w"), x);
                self.tape.add(wx, self.p("cat.b"))
            }
            FusionMode::Vbf => {
                let candidates = self.vbf_candidates(char_rep, ctx);
                self.cca_attend(query_char, ctx, &candidates).r
            }
        }
    }

    fn decoder_step(&mut self, input: u32, state: LstmState) -> (LstmState, ValueId) {
        let (w, b) = (self.p("decoder.w"), self.p("decoder.b"));
        let x = self.embed(input);
        let next = lstm_step(&mut self.tape, w, b, x, state.h, state.c);
        let wh = self.tape.matvec(self.p("output.w"), next.h);
        let logits = self.tape.add(wh, self.p("output.b"));
        (next, logits)
    }

    /// Teacher forcing over a BOS..EOS frame: one distribution (and one loss
    /// term) per target token, frame length minus one in total.
    pub fn decode_teacher(&mut self, r: ValueId, frame: &[u32]) -> TeacherLoss {
        assert!(frame.len() >= 2, "teacher frame needs BOS plus at least one target");
        debug_assert_eq!(frame[0], BOS, "teacher frame must start with BOS");
        let mut state = LstmState { h: r, c: r };
        let mut losses = Vec::with_capacity(frame.len() - 1);
        for t in 0..frame.len() - 1 {
            let (next, logits) = self.decoder_step(frame[t], state);
            state = next;
            losses.push(self.tape.cross_entropy(logits, frame[t + 1] as usize));
        }
        let mean_loss = self.tape.mean_scalars(&losses);
        TeacherLoss { mean_loss, token_count: losses.len() }
    }

    /// Greedy argmax decoding from BOS until EOS or `max_len` tokens; ties
    /// break toward the lowest token id.
    pub fn decode_greedy(&mut self, r: ValueId, max_len: usize) -> Vec<u32> {
        assert!(max_len >= 1, "max_len must be at least 1");
        let mut state = LstmState { h: r, c: r };
        let mut out = Vec::new();
        let mut input = BOS;
        for _ in 0..max_len {
            let (next, logits) = self.decoder_step(input, state);
            state = next;
            let values = self.tape.value(logits).data();
            let mut best = 0usize;
            for (i, &v) in values.iter().enumerate() {
                if v > values[best] {
                    best = i;
                }
            }
            let token = best as u32;
            out.push(token);
            if token == EOS {
                break;
            }
            input = token;
        }
        out
    }

    fn fused_state(&mut self, input: &ExampleInput) -> (ValueId, bool) {
        let ctx = self.encode_context(input.context);
        let cmm = self.character_state(input.experiences, input.char_token);
        let query = self.attention_query(&cmm);
        let r = self.fuse(cmm.final_h, query, ctx.final_h);
        (r, cmm.used_fallback)
    }

    /// Full pipeline to the per-token mean teacher-forced loss.
    pub fn example_loss(&mut self, input: &ExampleInput, frame: &[u32]) -> TeacherLoss {
        let (r, _) = self.fused_state(input);
        self.decode_teacher(r, frame)
    }

    /// Full pipeline to a greedy ending.
    pub fn generate(&mut self, input: &ExampleInput) -> GenerateOutput {
        let (r, used_fallback) = self.fused_state(input);
        let tokens = self.decode_greedy(r, self.config.max_decode_len);
        GenerateOutput { tokens, used_fallback }
    }
}
