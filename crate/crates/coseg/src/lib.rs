//! Character-oriented story ending generation.
//!
//! The pipeline: extract per-character experience sequences from
//! dependency-parsed stories, encode them with a chained character encoder,
//! fuse character and context states through vector breaking/forming with
//! candidate attention, and decode one ending per character. Training,
//! generation, fusion ablations and automatic evaluation (PPL, BLEU-1/2/3,
//! SucR) all run on the bundled numerics core without an external ML
//! framework.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod fixture;
pub mod model;
pub mod numerics;
pub mod training;

#[cfg(test)]
pub(crate) mod testsupport;

pub use error::{CosegError, Result};
