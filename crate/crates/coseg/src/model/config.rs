//! Model configuration: dimensions, fusion mode, breakpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CosegError, Result};

/// How character and context representations are combined into the decoder
/// initial state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    /// Vector breaking/forming candidates weighted by candidate attention.
    Vbf,
    /// Element-wise sum.
    Add,
    /// Concatenation through a linear layer.
    Cat,
}

impl std::str::FromStr for FusionMode {
    type Err = CosegError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "vbf" => Ok(FusionMode::Vbf),
            "add" => Ok(FusionMode::Add),
            "cat" => Ok(FusionMode::Cat),
            other => Err(CosegError::Config(format!("unknown fusion mode {other:?}"))),
        }
    }
}

/// Which character representation feeds the attention query. The candidate
/// set always uses the final representation; this switch only affects the
/// query side of the attention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionQuery {
    /// The representation after the last experience (default).
    FinalExperience,
    /// The representation after experience `index` (1-based); falls back to
    /// the final one when the sequence is shorter.
    Experience { index: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub breakpoints: Vec<usize>,
    pub fusion: FusionMode,
    pub vocab_size: usize,
    pub max_decode_len: usize,
    #[serde(default = "default_attention_query")]
    pub attention_query: AttentionQuery,
}

fn default_attention_query() -> AttentionQuery {
    AttentionQuery::FinalExperience
}

impl ModelConfig {
    /// Small dimensions that train on a laptop in seconds.
    pub fn desk_scale(vocab_size: usize) -> Self {
        ModelConfig {
            embed_dim: 32,
            hidden_dim: 64,
            breakpoints: vec![0, 16, 32, 48, 64],
            fusion: FusionMode::Vbf,
            vocab_size,
            max_decode_len: 20,
            attention_query: AttentionQuery::FinalExperience,
        }
    }

    /// The published configuration; needs the full corpus to be useful.
    pub fn full_scale(vocab_size: usize) -> Self {
        ModelConfig {
            embed_dim: 200,
            hidden_dim: 512,
            breakpoints: vec![0, 128, 256, 384, 512],
            fusion: FusionMode::Vbf,
            vocab_size,
            max_decode_len: 20,
            attention_query: AttentionQuery::FinalExperience,
        }
    }

    /// All hidden_dim + 1 breakpoints.
    pub fn full_breakpoints(hidden_dim: usize) -> Vec<usize> {
        (0..=hidden_dim).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CosegError::Config(msg));
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return fail("embed_dim and hidden_dim must be positive".into());
        }
        if self.vocab_size < 6 {
            return fail(format!(
                "vocab_size {} leaves no room beyond the 5 reserved tokens",
                self.vocab_size
            ));
        }
        if self.max_decode_len == 0 {
            return fail("max_decode_len must be at least 1".into());
        }
        if self.fusion == FusionMode::Vbf {
            if self.breakpoints.is_empty() {
                return fail("vbf fusion needs at least one breakpoint".into());
            }
            if !self.breakpoints.windows(2).all(|w| w[0] < w[1]) {
                return fail(format!("breakpoints {:?} must be strictly increasing", self.breakpoints));
            }
            if let Some(&bad) = self.breakpoints.iter().find(|&&k| k > self.hidden_dim) {
                return fail(format!(
                    "breakpoint {bad} exceeds hidden_dim {}",
                    self.hidden_dim
                ));
            }
        }
        Ok(())
    }

    /// Number of product candidates (VBF only).
    pub fn n_candidates(&self) -> usize {
        self.breakpoints.len()
    }

    /// Stable string for checkpoint fingerprinting; every field that changes
    /// parameter shapes or semantics appears here.
    pub fn canonical_string(&self) -> String {
        format!(
            "embed_dim={};hidden_dim={};breakpoints={:?};fusion={:?};vocab_size={};max_decode_len={};attention_query={:?}",
            self.embed_dim,
            self.hidden_dim,
            self.breakpoints,
            self.fusion,
            self.vocab_size,
            self.max_decode_len,
            self.attention_query,
        )
    }

    /// Identifier used in the metrics CSV model column.
    pub fn model_label(&self) -> String {
        match self.fusion {
            FusionMode::Vbf => {
                let joined: Vec<String> =
                    self.breakpoints.iter().map(|k| k.to_string()).collect();
                format!("coseg({})", joined.join("-"))
            }
            FusionMode::Add => "coadd".to_string(),
            FusionMode::Cat => "cocat".to_string(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CosegError::Config(format!("serializing config: {e}")))?;
        fs::write(path, text).map_err(|e| CosegError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CosegError::io(path, e))?;
        let config: ModelConfig = toml::from_str(&text)
            .map_err(|e| CosegError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }
}
