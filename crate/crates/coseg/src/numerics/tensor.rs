//! Dense vector/matrix values. Row-major, 64-bit floats throughout.

use serde::{Deserialize, Serialize};

/// Shape of a tensor. Fixed at construction; scalars are vectors of length 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Vector { len: usize },
    Matrix { rows: usize, cols: usize },
}

impl Shape {
    pub fn numel(&self) -> usize {
        match *self {
            Shape::Vector { len } => len,
            Shape::Matrix { rows, cols } => rows * cols,
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(*self, Shape::Vector { len: 1 })
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Shape::Vector { len } => write!(f, "[{len}]"),
            Shape::Matrix { rows, cols } => write!(f, "[{rows}x{cols}]"),
        }
    }
}

/// A dense value with immutable shape. Entries are required to be finite;
/// constructors assert this so NaN/Inf never enters a graph through a leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn vector(data: Vec<f64>) -> Self {
        assert_finite(&data);
        let len = data.len();
        Tensor { shape: Shape::Vector { len }, data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length {} != {rows}x{cols}", data.len());
        assert_finite(&data);
        Tensor { shape: Shape::Matrix { rows, cols }, data }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor::vector(vec![value])
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor { shape, data: vec![0.0; shape.numel()] }
    }

    pub fn zeros_vector(len: usize) -> Self {
        Tensor::zeros(Shape::Vector { len })
    }

    pub fn zeros_matrix(rows: usize, cols: usize) -> Self {
        Tensor::zeros(Shape::Matrix { rows, cols })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Row `r` of a matrix as a slice.
    pub fn row(&self, r: usize) -> &[f64] {
        match self.shape {
            Shape::Matrix { rows, cols } => {
                assert!(r < rows, "row {r} out of range for {rows} rows");
                &self.data[r * cols..(r + 1) * cols]
            }
            Shape::Vector { .. } => panic!("row() called on a vector"),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn assert_finite(data: &[f64]) {
    if let Some((i, v)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        panic!("non-finite entry {v} at index {i}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_numel() {
        assert_eq!(Shape::Vector { len: 3 }.numel(), 3);
        assert_eq!(Shape::Matrix { rows: 2, cols: 4 }.numel(), 8);
        assert!(Shape::Vector { len: 1 }.is_scalar());
        assert!(!Shape::Vector { len: 2 }.is_scalar());
    }

    #[test]
    fn matrix_rows() {
        let m = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m.row(0), &[1.0, 2.0, 3.0]);
        assert_eq!(m.row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    #[should_panic(expected = "non-finite entry")]
    fn rejects_nan() {
        Tensor::vector(vec![0.0, f64::NAN]);
    }

    #[test]
    #[should_panic(expected = "matrix data length")]
    fn rejects_shape_mismatch() {
        Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0]);
    }
}
