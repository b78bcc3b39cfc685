use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AutodiffError;

/// Dense 64-bit tensor. The substrate for every network in the crate.
///
/// `grad`, when present, always has the same length as `data` and is
/// accumulated additively by [`crate::autodiff::Tape::accumulate_param_grads`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, AutodiffError> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(AutodiffError::Shape(format!(
                "shape {:?} implies {} elements, got {}",
                shape,
                numel,
                data.len()
            )));
        }
        Ok(Tensor { shape, data, requires_grad: false, grad: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor { shape, data: vec![0.0; numel], requires_grad: false, grad: None }
    }

    pub fn scalar(x: f64) -> Self {
        Tensor { shape: vec![], data: vec![x], requires_grad: false, grad: None }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor { shape: vec![data.len()], data, requires_grad: false, grad: None }
    }

    /// Row-major 2-D tensor.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AutodiffError> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1 && self.shape.iter().product::<usize>() == 1
    }

    pub fn item(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    pub fn requires_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }
}

/// Named persistent parameter store shared by every network.
///
/// Iteration order is the lexicographic name order (BTreeMap), which keeps
/// optimizer sweeps, checkpoints and gradient checks deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    entries: BTreeMap<String, Tensor>,
}

impl Params {
    pub fn new() -> Self {
        Params { entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        let mut t = tensor;
        t.requires_grad = true;
        self.entries.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, AutodiffError> {
        self.entries
            .get(name)
            .ok_or_else(|| AutodiffError::UnknownParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor, AutodiffError> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| AutodiffError::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.entries.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn zero_grad(&mut self) {
        for t in self.entries.values_mut() {
            t.zero_grad();
        }
    }

    /// Total scalar count across all entries.
    pub fn numel(&self) -> usize {
        self.entries.values().map(|t| t.numel()).sum()
    }

    /// Merge another store; duplicate names are rejected.
    pub fn merge(&mut self, other: Params) -> Result<(), AutodiffError> {
        for (name, t) in other.entries {
            if self.entries.contains_key(&name) {
                return Err(AutodiffError::DuplicateParam(name));
            }
            self.entries.insert(name, t);
        }
        Ok(())
    }
}
