use std::collections::HashMap;

use super::Tensor2D;
use crate::error::{Error, Result};

/// Named parameter tensors with fixed shapes, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor2D>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor2D) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::InvalidParameter(format!("duplicate parameter name {name:?}")));
        }
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(tensor);
        Ok(())
    }

    /// Builder-style insert for sets assembled in code with known-unique names.
    pub fn with(mut self, name: &str, tensor: Tensor2D) -> Self {
        self.insert(name, tensor).expect("unique parameter name");
        self
    }

    pub fn get(&self, name: &str) -> &Tensor2D {
        match self.index.get(name) {
            Some(&i) => &self.tensors[i],
            None => panic!("unknown parameter {name:?}"),
        }
    }

    pub fn try_get(&self, name: &str) -> Option<&Tensor2D> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor2D {
        match self.index.get(name) {
            Some(&i) => &mut self.tensors[i],
            None => panic!("unknown parameter {name:?}"),
        }
    }

    /// Adds `delta` into the named tensor (gradient accumulation).
    pub fn accumulate(&mut self, name: &str, delta: &Tensor2D) {
        let t = self.get_mut(name);
        debug_assert_eq!(t.shape(), delta.shape(), "gradient shape for {name}");
        t.add_assign(delta);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor2D::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor2D)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor2D)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter_mut())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| Tensor2D::zeros(t.rows(), t.cols())).collect(),
            index: self.index.clone(),
        }
    }

    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.names == other.names && self.tensors.iter().zip(&other.tensors).all(|(a, b)| a.shape() == b.shape())
    }

    /// Element-wise `self += s * other`; layouts must match.
    pub fn add_scaled(&mut self, other: &ParamSet, s: f64) {
        debug_assert!(self.same_layout(other));
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_scaled(b, s);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            *t = t.scale(s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor2D::is_finite)
    }

    /// Copies every tensor whose name starts with `prefix`, stripping it.
    pub fn subset(&self, prefix: &str) -> ParamSet {
        let mut out = ParamSet::new();
        for (n, t) in self.iter() {
            if let Some(rest) = n.strip_prefix(prefix) {
                out.insert(rest, t.clone()).expect("names unique in source");
            }
        }
        out
    }

    /// Inserts every tensor of `other` under `prefix`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &ParamSet) -> Result<()> {
        for (n, t) in other.iter() {
            self.insert(format!("{prefix}{n}"), t.clone())?;
        }
        Ok(())
    }

    /// Flat view over all scalars, used by the gradient checker.
    pub(crate) fn scalar_mut(&mut self, mut flat: usize) -> &mut f64 {
        for t in &mut self.tensors {
            if flat < t.len() {
                return &mut t.data_mut()[flat];
            }
            flat -= t.len();
        }
        panic!("scalar index out of range")
    }

    pub(crate) fn scalar(&self, mut flat: usize) -> f64 {
        for t in &self.tensors {
            if flat < t.len() {
                return t.data()[flat];
            }
            flat -= t.len();
        }
        panic!("scalar index out of range")
    }

    /// `(tensor name, row, col)` for a flat scalar index.
    pub fn locate(&self, mut flat: usize) -> Option<(&str, usize, usize)> {
        for (n, t) in self.iter() {
            if flat < t.len() {
                return Some((n, flat / t.cols(), flat % t.cols()));
            }
            flat -= t.len();
        }
        None
    }
}
