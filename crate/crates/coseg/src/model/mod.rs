//! Model configuration, vector breaking/forming, and the network.

pub mod config;
pub mod net;
pub mod vbf;

pub use config::{AttentionQuery, FusionMode, ModelConfig};
pub use net::{
    CcaOutput, CmmEncoding, ContextEncoding, CosegModel, ExampleInput, Forward, GenerateOutput,
    TeacherLoss, INIT_BOUND,
};
pub use vbf::{product_candidates, vector_break, vector_form};
