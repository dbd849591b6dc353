//! Reverse-mode autodiff over a dynamically recorded tape.
//!
//! Forward ops are eager: each call computes its value and records the
//! operation. `backward()` replays the tape in reverse, accumulating
//! vector-Jacobian products into per-node gradient buffers. Values are
//! immutable once recorded, so sequence lengths are free to vary between
//! recordings; every training step builds a fresh tape.
//!
//! Shape violations are programming errors and panic; numeric robustness
//! (softmax/log-sum-exp stabilization) is built into the ops themselves.

use super::tensor::{Shape, Tensor};

/// Handle to a node on a [`Tape`]. Only valid for the tape that issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ValueId(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    /// y = W x, W: rows x cols matrix, x: cols vector.
    MatVec { w: ValueId, x: ValueId },
    /// Elementwise sum of two equal-length vectors.
    Add { a: ValueId, b: ValueId },
    /// Elementwise product of two equal-length vectors.
    Mul { a: ValueId, b: ValueId },
    /// y = c * x for a fixed (non-differentiated) constant c.
    Scale { x: ValueId, c: f64 },
    /// y = [a ; b].
    Concat { a: ValueId, b: ValueId },
    /// y = x[offset .. offset+len].
    Slice { x: ValueId, offset: usize, len: usize },
    Sigmoid { x: ValueId },
    Tanh { x: ValueId },
    /// Max-subtracted softmax over a whole vector.
    Softmax { x: ValueId },
    /// Scalar -log softmax(logits)[target], computed via log-sum-exp.
    CrossEntropy { logits: ValueId, target: usize },
    /// y = row `index` of an embedding matrix.
    EmbedRow { matrix: ValueId, index: usize },
    /// y = a[0..k] ++ b[k..n] for two vectors of equal length n.
    FormJoin { a: ValueId, b: ValueId, k: usize },
    /// y = sum_k weights[k] * items[k]; all items equal-length vectors.
    WeightedSum { weights: ValueId, items: Vec<ValueId> },
    /// Scalar mean of scalar nodes.
    MeanScalars { xs: Vec<ValueId> },
    /// Scalar sum of a vector's elements.
    SumElements { x: ValueId },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Recording tape. One forward invocation = one tape.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: ValueId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward()` loss w.r.t. this node.
    /// `None` if no path connected the node to the loss.
    pub fn grad(&self, id: ValueId) -> Option<&[f64]> {
        self.grads[id.0].as_deref()
    }

    fn push(&mut self, value: Tensor, op: Op) -> ValueId {
        debug_assert!(value.is_finite(), "op produced a non-finite value");
        let id = ValueId(self.nodes.len());
        self.nodes.push(Node { value, op });
        self.grads.push(None);
        id
    }

    fn vec_len(&self, id: ValueId) -> usize {
        match self.value(id).shape() {
            Shape::Vector { len } => len,
            s => panic!("expected vector, got {s}"),
        }
    }

    // ── Forward ops ─────────────────────────────────────────────────

    pub fn leaf(&mut self, value: Tensor) -> ValueId {
        self.push(value, Op::Leaf)
    }

    pub fn matvec(&mut self, w: ValueId, x: ValueId) -> ValueId {
        let (rows, cols) = match self.value(w).shape() {
            Shape::Matrix { rows, cols } => (rows, cols),
            s => panic!("matvec weight must be a matrix, got {s}"),
        };
        let n = self.vec_len(x);
        assert_eq!(cols, n, "matvec shape mismatch: {rows}x{cols} times [{n}]");
        let wd = self.value(w).data();
        let xd = self.value(x).data();
        let mut out = vec![0.0; rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &wd[i * cols..(i + 1) * cols];
            *o = row.iter().zip(xd).map(|(a, b)| a * b).sum();
        }
        self.push(Tensor::vector(out), Op::MatVec { w, x })
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (la, lb) = (self.vec_len(a), self.vec_len(b));
        assert_eq!(la, lb, "add length mismatch: {la} vs {lb}");
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        self.push(Tensor::vector(out), Op::Add { a, b })
    }

    pub fn mul(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (la, lb) = (self.vec_len(a), self.vec_len(b));
        assert_eq!(la, lb, "mul length mismatch: {la} vs {lb}");
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        self.push(Tensor::vector(out), Op::Mul { a, b })
    }

    pub fn scale(&mut self, x: ValueId, c: f64) -> ValueId {
        assert!(c.is_finite(), "scale constant must be finite");
        let out: Vec<f64> = self.value(x).data().iter().map(|v| c * v).collect();
        self.push(Tensor::vector(out), Op::Scale { x, c })
    }

    pub fn concat(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let mut out = Vec::with_capacity(self.vec_len(a) + self.vec_len(b));
        out.extend_from_slice(self.value(a).data());
        out.extend_from_slice(self.value(b).data());
        self.push(Tensor::vector(out), Op::Concat { a, b })
    }

    pub fn slice(&mut self, x: ValueId, offset: usize, len: usize) -> ValueId {
        let n = self.vec_len(x);
        assert!(len >= 1, "slice length must be >= 1");
        assert!(offset + len <= n, "slice [{offset}, {}) out of range for [{n}]", offset + len);
        let out = self.value(x).data()[offset..offset + len].to_vec();
        self.push(Tensor::vector(out), Op::Slice { x, offset, len })
    }

    pub fn sigmoid(&mut self, x: ValueId) -> ValueId {
        let out: Vec<f64> = self.value(x).data().iter().map(|&v| sigmoid(v)).collect();
        self.push(Tensor::vector(out), Op::Sigmoid { x })
    }

    pub fn tanh(&mut self, x: ValueId) -> ValueId {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v.tanh()).collect();
        self.push(Tensor::vector(out), Op::Tanh { x })
    }

    pub fn softmax(&mut self, x: ValueId) -> ValueId {
        let n = self.vec_len(x);
        assert!(n >= 1, "softmax of an empty vector");
        let out = stable_softmax(self.value(x).data());
        self.push(Tensor::vector(out), Op::Softmax { x })
    }

    pub fn cross_entropy(&mut self, logits: ValueId, target: usize) -> ValueId {
        let n = self.vec_len(logits);
        assert!(target < n, "cross_entropy target {target} out of range for [{n}]");
        let d = self.value(logits).data();
        let max = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + d.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - d[target];
        self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, target })
    }

    pub fn embed_row(&mut self, matrix: ValueId, index: usize) -> ValueId {
        let rows = match self.value(matrix).shape() {
            Shape::Matrix { rows, .. } => rows,
            s => panic!("embed_row needs a matrix, got {s}"),
        };
        assert!(index < rows, "embedding row {index} out of range for {rows} rows");
        let out = self.value(matrix).row(index).to_vec();
        self.push(Tensor::vector(out), Op::EmbedRow { matrix, index })
    }

    /// Vector forming on the tape: left part of `a`, right part of `b`.
    pub fn form_join(&mut self, a: ValueId, b: ValueId, k: usize) -> ValueId {
        let (la, lb) = (self.vec_len(a), self.vec_len(b));
        assert_eq!(la, lb, "form_join length mismatch: {la} vs {lb}");
        assert!(k <= la, "form_join position {k} out of range for [{la}]");
        let mut out = Vec::with_capacity(la);
        out.extend_from_slice(&self.value(a).data()[..k]);
        out.extend_from_slice(&self.value(b).data()[k..]);
        self.push(Tensor::vector(out), Op::FormJoin { a, b, k })
    }

    pub fn weighted_sum(&mut self, weights: ValueId, items: &[ValueId]) -> ValueId {
        let k = self.vec_len(weights);
        assert_eq!(k, items.len(), "weighted_sum has {k} weights for {} items", items.len());
        assert!(k >= 1, "weighted_sum over no items");
        let n = self.vec_len(items[0]);
        for &it in items {
            assert_eq!(self.vec_len(it), n, "weighted_sum item length mismatch");
        }
        let wd = self.value(weights).data().to_vec();
        let mut out = vec![0.0; n];
        for (w, &it) in wd.iter().zip(items) {
            for (o, v) in out.iter_mut().zip(self.value(it).data()) {
                *o += w * v;
            }
        }
        self.push(Tensor::vector(out), Op::WeightedSum { weights, items: items.to_vec() })
    }

    pub fn mean_scalars(&mut self, xs: &[ValueId]) -> ValueId {
        assert!(!xs.is_empty(), "mean over no scalars");
        let mut total = 0.0;
        for &x in xs {
            assert!(self.value(x).shape().is_scalar(), "mean_scalars over non-scalar node");
            total += self.value(x).data()[0];
        }
        let mean = total / xs.len() as f64;
        self.push(Tensor::scalar(mean), Op::MeanScalars { xs: xs.to_vec() })
    }

    pub fn sum_elements(&mut self, x: ValueId) -> ValueId {
        let total: f64 = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(total), Op::SumElements { x })
    }

    // ── Backward ────────────────────────────────────────────────────

    /// Reverse pass from a scalar loss. Gradients accumulate across all
    /// consumers of each node; unreachable nodes keep `grad == None`.
    pub fn backward(&mut self, loss: ValueId) {
        assert!(
            self.value(loss).shape().is_scalar(),
            "backward requires a scalar loss, got {}",
            self.value(loss).shape()
        );
        for g in self.grads.iter_mut() {
            *g = None;
        }
        self.grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let d_out = match &self.grads[idx] {
                Some(g) => g.clone(),
                None => continue,
            };
            let op = self.nodes[idx].op.clone();
            match op {
                Op::Leaf => {}
                Op::MatVec { w, x } => {
                    let (rows, cols) = match self.value(w).shape() {
                        Shape::Matrix { rows, cols } => (rows, cols),
                        _ => unreachable!(),
                    };
                    let xd = self.value(x).data().to_vec();
                    let wd = self.value(w).data().to_vec();
                    let mut dw = vec![0.0; rows * cols];
                    let mut dx = vec![0.0; cols];
                    for i in 0..rows {
                        let dy = d_out[i];
                        for j in 0..cols {
                            dw[i * cols + j] += dy * xd[j];
                            dx[j] += wd[i * cols + j] * dy;
                        }
                    }
                    self.accumulate(w, &dw);
                    self.accumulate(x, &dx);
                }
                Op::Add { a, b } => {
                    self.accumulate(a, &d_out);
                    self.accumulate(b, &d_out);
                }
                Op::Mul { a, b } => {
                    let da: Vec<f64> =
                        d_out.iter().zip(self.value(b).data()).map(|(d, v)| d * v).collect();
                    let db: Vec<f64> =
                        d_out.iter().zip(self.value(a).data()).map(|(d, v)| d * v).collect();
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::Scale { x, c } => {
                    let dx: Vec<f64> = d_out.iter().map(|d| c * d).collect();
                    self.accumulate(x, &dx);
                }
                Op::Concat { a, b } => {
                    let la = self.value(a).numel();
                    self.accumulate(a, &d_out[..la]);
                    self.accumulate(b, &d_out[la..]);
                }
                Op::Slice { x, offset, len } => {
                    let mut dx = vec![0.0; self.value(x).numel()];
                    dx[offset..offset + len].copy_from_slice(&d_out);
                    self.accumulate(x, &dx);
                }
                Op::Sigmoid { x } => {
                    let dx: Vec<f64> = d_out
                        .iter()
                        .zip(self.nodes[idx].value.data())
                        .map(|(d, y)| d * y * (1.0 - y))
                        .collect();
                    self.accumulate(x, &dx);
                }
                Op::Tanh { x } => {
                    let dx: Vec<f64> = d_out
                        .iter()
                        .zip(self.nodes[idx].value.data())
                        .map(|(d, y)| d * (1.0 - y * y))
                        .collect();
                    self.accumulate(x, &dx);
                }
                Op::Softmax { x } => {
                    let y = self.nodes[idx].value.data();
                    let dot: f64 = d_out.iter().zip(y).map(|(d, v)| d * v).sum();
                    let dx: Vec<f64> = d_out.iter().zip(y).map(|(d, v)| v * (d - dot)).collect();
                    self.accumulate(x, &dx);
                }
                Op::CrossEntropy { logits, target } => {
                    let mut dx = stable_softmax(self.value(logits).data());
                    dx[target] -= 1.0;
                    for v in dx.iter_mut() {
                        *v *= d_out[0];
                    }
                    self.accumulate(logits, &dx);
                }
                Op::EmbedRow { matrix, index } => {
                    let (rows, cols) = match self.value(matrix).shape() {
                        Shape::Matrix { rows, cols } => (rows, cols),
                        _ => unreachable!(),
                    };
                    let mut dm = vec![0.0; rows * cols];
                    dm[index * cols..(index + 1) * cols].copy_from_slice(&d_out);
                    self.accumulate(matrix, &dm);
                }
                Op::FormJoin { a, b, k } => {
                    let n = d_out.len();
                    let mut da = vec![0.0; n];
                    let mut db = vec![0.0; n];
                    da[..k].copy_from_slice(&d_out[..k]);
                    db[k..].copy_from_slice(&d_out[k..]);
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::WeightedSum { weights, items } => {
                    let wd = self.value(weights).data().to_vec();
                    let mut dweights = vec![0.0; items.len()];
                    for (k, &it) in items.iter().enumerate() {
                        dweights[k] = d_out.iter().zip(self.value(it).data()).map(|(d, v)| d * v).sum();
                        let di: Vec<f64> = d_out.iter().map(|d| wd[k] * d).collect();
                        self.accumulate(it, &di);
                    }
                    self.accumulate(weights, &dweights);
                }
                Op::MeanScalars { xs } => {
                    let share = d_out[0] / xs.len() as f64;
                    for &x in &xs {
                        self.accumulate(x, &[share]);
                    }
                }
                Op::SumElements { x } => {
                    let dx = vec![d_out[0]; self.value(x).numel()];
                    self.accumulate(x, &dx);
                }
            }
        }
    }

    fn accumulate(&mut self, id: ValueId, contrib: &[f64]) {
        match &mut self.grads[id.0] {
            Some(g) => {
                debug_assert_eq!(g.len(), contrib.len());
                for (a, b) in g.iter_mut().zip(contrib) {
                    *a += b;
                }
            }
            None => self.grads[id.0] = Some(contrib.to_vec()),
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn stable_softmax(d: &[f64]) -> Vec<f64> {
    let max = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = d.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
