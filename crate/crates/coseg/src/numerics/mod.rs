//! f64 tensor math, reverse-mode autodiff, and optimizer state.

pub mod checkpoint;
pub mod gradcheck;
pub mod lstm;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use checkpoint::{config_fingerprint, load_checkpoint, save_checkpoint, Checkpoint, TrainMeta};
pub use lstm::{lstm_step, LstmState};
pub use optim::{clip_gradients, global_grad_norm, momentum_sgd_step, zero_velocity, Velocity};
pub use params::{collect_grads, uniform_tensor, BoundParams, GradSet, ParamSet};
pub use tape::{Tape, ValueId};
pub use tensor::{Shape, Tensor};
