//! Vector breaking and forming on plain slices.
//!
//! Breaking splits a vector at one of its n+1 bond positions; forming joins
//! the left part of the first vector with the right part of the second, so
//! the result always keeps the input size. The tape-level counterpart is
//! `Tape::form_join`; these functions are the ground truth it is tested
//! against.

/// Splits `v` at position `k`: first k elements left, rest right.
pub fn vector_break(v: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k <= v.len(), "break position {k} out of range for length {}", v.len());
    (v[..k].to_vec(), v[k..].to_vec())
}

/// Left part of `a` up to `k`, right part of `b` from `k`.
pub fn vector_form(a: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "form inputs differ in length: {} vs {}", a.len(), b.len());
    assert!(k <= a.len(), "form position {k} out of range for length {}", a.len());
    let mut out = Vec::with_capacity(a.len());
    out.extend_from_slice(&a[..k]);
    out.extend_from_slice(&b[k..]);
    out
}

/// All candidates for the given breakpoints, first vector `a`, second `b`.
pub fn product_candidates(a: &[f64], b: &[f64], breakpoints: &[usize]) -> Vec<Vec<f64>> {
    breakpoints.iter().map(|&k| vector_form(a, b, k)).collect()
}
