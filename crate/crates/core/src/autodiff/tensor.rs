use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`, detached from any graph.
///
/// Scalars are `1×1`, row vectors `1×c`, batches `n×c`. Values are shared
/// behind an `Arc`, so cloning a tensor or lifting it into a [`Graph`] never
/// copies data.
///
/// [`Graph`]: super::Graph
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    data: Arc<Array2<f64>>,
}

impl Tensor {
    pub fn from_array(array: Array2<f64>) -> Self {
        let array = if array.is_standard_layout() {
            array
        } else {
            array.as_standard_layout().into_owned()
        };
        Self {
            data: Arc::new(array),
        }
    }

    pub(crate) fn from_shared(data: Arc<Array2<f64>>) -> Self {
        if data.is_standard_layout() {
            Self { data }
        } else {
            Self::from_array(data.as_standard_layout().into_owned())
        }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::InvalidShape {
                shape: vec![rows, cols],
                reason: format!("{} values supplied", values.len()),
            });
        }
        let array = Array2::from_shape_vec((rows, cols), values).expect("length checked above");
        Ok(Self::from_array(array))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_array(Array2::zeros((rows, cols)))
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_array(Array2::from_elem((1, 1), value))
    }

    /// A `1×c` row vector.
    pub fn row(values: &[f64]) -> Self {
        Self::from_array(Array2::from_shape_vec((1, values.len()), values.to_vec()).unwrap())
    }

    pub fn shape(&self) -> &[usize] {
        self.data.shape()
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        self.data
            .as_slice()
            .expect("tensors are kept in standard layout")
    }

    pub fn array(&self) -> &Array2<f64> {
        &self.data
    }

    pub(crate) fn shared(&self) -> Arc<Array2<f64>> {
        Arc::clone(&self.data)
    }

    pub fn into_array(self) -> Array2<f64> {
        Arc::try_unwrap(self.data).unwrap_or_else(|shared| (*shared).clone())
    }

    /// The single value of a `1×1` tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.dim() != (1, 1) {
            return Err(Error::NonScalarOutput(self.shape().to_vec()));
        }
        Ok(self.data[[0, 0]])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl From<Array2<f64>> for Tensor {
    fn from(array: Array2<f64>) -> Self {
        Self::from_array(array)
    }
}
