//! Central-difference gradient verification.
//!
//! The numeric side only ever calls the forward closure, so it shares no code
//! with the reverse pass it is checking.

use super::params::{GradSet, ParamSet};

/// Worst observed disagreement between analytic and numeric gradients.
#[derive(Clone, Debug)]
pub struct GradCheckSummary {
    pub max_rel_error: f64,
    /// Parameter name, flat index, analytic value, numeric value at the worst
    /// coordinate. `None` only for empty parameter sets.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Numeric gradient of `f` at `params` by central differences with step `eps`.
pub fn central_difference<F>(params: &ParamSet, eps: f64, f: F) -> GradSet
where
    F: Fn(&ParamSet) -> f64,
{
    assert!(eps > 0.0, "finite-difference step must be positive");
    let mut numeric = GradSet::new();
    let mut probe = params.clone();
    for (name, tensor) in params.iter() {
        let mut g = vec![0.0; tensor.numel()];
        for (j, slot) in g.iter_mut().enumerate() {
            let original = tensor.data()[j];
            probe.get_mut(name).data_mut()[j] = original + eps;
            let hi = f(&probe);
            probe.get_mut(name).data_mut()[j] = original - eps;
            let lo = f(&probe);
            probe.get_mut(name).data_mut()[j] = original;
            *slot = (hi - lo) / (2.0 * eps);
        }
        numeric.insert(name.to_string(), g);
    }
    numeric
}

/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compares two gradient sets coordinate by coordinate.
pub fn compare_grads(analytic: &GradSet, numeric: &GradSet) -> GradCheckSummary {
    assert_eq!(
        analytic.keys().collect::<Vec<_>>(),
        numeric.keys().collect::<Vec<_>>(),
        "gradient sets cover different parameters"
    );
    let mut summary = GradCheckSummary { max_rel_error: 0.0, worst: None };
    for (name, a) in analytic {
        let n = &numeric[name];
        assert_eq!(a.len(), n.len(), "gradient length mismatch for {name:?}");
        for (j, (&av, &nv)) in a.iter().zip(n).enumerate() {
            let rel = relative_error(av, nv);
            if rel >= summary.max_rel_error {
                summary.max_rel_error = rel;
                summary.worst = Some((name.clone(), j, av, nv));
            }
        }
    }
    summary
}
