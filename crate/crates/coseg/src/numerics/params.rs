//! Named parameter collections and their attachment to a tape.
//!
//! Parameters live in a `BTreeMap` so every traversal (checkpointing,
//! optimizer updates, gradient collection) sees the same order regardless of
//! insertion history.

use std::collections::BTreeMap;

use rand::Rng;

use super::tape::{Tape, ValueId};
use super::tensor::{Shape, Tensor};

/// All trainable tensors of a model, keyed by stable names.
#[derive(Clone, Debug, Default)]
pub struct ParamSet {
    map: BTreeMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        let name = name.into();
        assert!(
            self.map.insert(name.clone(), tensor).is_none(),
            "duplicate parameter name {name:?}"
        );
    }

    pub fn get(&self, name: &str) -> &Tensor {
        self.map
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        self.map
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn total_elements(&self) -> usize {
        self.map.values().map(Tensor::numel).sum()
    }

    /// Names in iteration (sorted) order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.map.iter_mut().map(|(k, v)| (k.as_str(), v))
    }
}

/// Draws a tensor with entries uniform in `[-bound, bound]`.
pub fn uniform_tensor<R: Rng>(rng: &mut R, shape: Shape, bound: f64) -> Tensor {
    let data: Vec<f64> = (0..shape.numel()).map(|_| rng.gen_range(-bound..=bound)).collect();
    match shape {
        Shape::Vector { .. } => Tensor::vector(data),
        Shape::Matrix { rows, cols } => Tensor::matrix(rows, cols, data),
    }
}

/// Tape handles for every parameter of a [`ParamSet`].
pub struct BoundParams {
    ids: BTreeMap<String, ValueId>,
}

impl BoundParams {
    /// Records every parameter as a leaf on the tape.
    pub fn bind(tape: &mut Tape, params: &ParamSet) -> Self {
        let mut ids = BTreeMap::new();
        for (name, tensor) in params.iter() {
            ids.insert(name.to_string(), tape.leaf(tensor.clone()));
        }
        BoundParams { ids }
    }

    pub fn id(&self, name: &str) -> ValueId {
        *self
            .ids
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name:?} was not bound"))
    }
}

/// Flat gradients per parameter, same key set as the originating [`ParamSet`].
pub type GradSet = BTreeMap<String, Vec<f64>>;

/// Reads gradients off the tape after `backward()`. Parameters the loss never
/// touched get explicit zeros so optimizer bookkeeping stays uniform.
pub fn collect_grads(tape: &Tape, bound: &BoundParams, params: &ParamSet) -> GradSet {
    let mut grads = GradSet::new();
    for (name, tensor) in params.iter() {
        let g = match tape.grad(bound.id(name)) {
            Some(g) => g.to_vec(),
            None => vec![0.0; tensor.numel()],
        };
        grads.insert(name.to_string(), g);
    }
    grads
}
