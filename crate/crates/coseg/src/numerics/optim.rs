//! Momentum SGD with global gradient-norm clipping.

use crate::error::{CosegError, Result};

use super::params::{GradSet, ParamSet};

/// Per-parameter velocity buffers, same keys and lengths as the gradients.
pub type Velocity = GradSet;

/// Velocity buffers of zeros matching a parameter set.
pub fn zero_velocity(params: &ParamSet) -> Velocity {
    params
        .iter()
        .map(|(name, tensor)| (name.to_string(), vec![0.0; tensor.numel()]))
        .collect()
}

/// L2 norm over all gradients taken together.
pub fn global_grad_norm(grads: &GradSet) -> f64 {
    grads
        .values()
        .flat_map(|g| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Rescales every gradient by `max_norm / norm` when the global norm exceeds
/// `max_norm`. Returns the pre-clip norm either way.
pub fn clip_gradients(grads: &mut GradSet, max_norm: f64) -> f64 {
    assert!(max_norm > 0.0, "clip threshold must be positive");
    let norm = global_grad_norm(grads);
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.values_mut() {
            for v in g.iter_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

/// One update: `v <- momentum * v + g`, then `theta <- theta - lr * v`.
///
/// `lr = 0` is allowed and freezes parameters while velocity still
/// accumulates; useful as a no-op training diagnostic. Rejects non-finite
/// gradients before touching any state, so a failed step leaves parameters
/// and velocity exactly as they were.
pub fn momentum_sgd_step(
    params: &mut ParamSet,
    velocity: &mut Velocity,
    grads: &GradSet,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    assert!((0.0..1.0).contains(&momentum), "momentum must be in [0, 1)");
    assert!(lr >= 0.0 && lr.is_finite(), "learning rate must be non-negative and finite");
    for (name, g) in grads {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(CosegError::NonFiniteGradient(format!(
                "gradient for {name:?} contains NaN or Inf"
            )));
        }
    }
    for (name, g) in grads {
        let v = velocity
            .get_mut(name)
            .unwrap_or_else(|| panic!("no velocity buffer for {name:?}"));
        assert_eq!(v.len(), g.len(), "velocity/gradient length mismatch for {name:?}");
        let theta = params.get_mut(name).data_mut();
        assert_eq!(theta.len(), g.len(), "parameter/gradient length mismatch for {name:?}");
        for j in 0..g.len() {
            v[j] = momentum * v[j] + g[j];
            theta[j] -= lr * v[j];
        }
    }
    Ok(())
}
