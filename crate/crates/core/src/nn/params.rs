use serde::{Deserialize, Serialize};

use super::scalar::Scalar;

/// One named parameter tensor. Values are stored as `f32`, which is also the
/// on-disk precision, so checkpoints round-trip bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl ParamTensor {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn filled(name: impl Into<String>, shape: Vec<usize>, value: f32) -> Self {
        let mut t = Self::zeros(name, shape);
        t.data.fill(value);
        t
    }
}

/// Ordered collection of named parameter tensors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    pub tensors: Vec<ParamTensor>,
}

impl ParamStore {
    pub fn push(&mut self, t: ParamTensor) -> usize {
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    pub fn get(&self, name: &str) -> Option<&ParamTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ParamTensor> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Per-tensor copies converted to the compute type.
    pub fn materialize<S: Scalar>(&self) -> Vec<Vec<S>> {
        self.tensors
            .iter()
            .map(|t| t.data.iter().map(|&v| S::from_f64(v as f64)).collect())
            .collect()
    }

    /// Zero-filled gradient buffers with the same layout.
    pub fn zeros_like<S: Scalar>(&self) -> Vec<Vec<S>> {
        self.tensors.iter().map(|t| vec![S::zero(); t.data.len()]).collect()
    }

    /// Row-major concatenation of every tensor, in store order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data.iter().map(|&v| v as f64)).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.numel());
        let mut it = flat.iter();
        for t in &mut self.tensors {
            for v in &mut t.data {
                *v = *it.next().unwrap() as f32;
            }
        }
    }
}

/// Flatten per-tensor gradients (in store order) to `f64`.
pub fn flatten_grads<S: Scalar>(grads: &[Vec<S>]) -> Vec<f64> {
    grads.iter().flat_map(|g| g.iter().map(|v| v.re())).collect()
}
