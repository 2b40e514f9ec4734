use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::Matrix;
use crate::error::{invalid, Result};

/// Index of an entry in a [`ParameterStore`]; also its iteration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    name: String,
    value: Matrix,
    grad: Matrix,
}

/// Named parameter matrices together with their accumulated gradients.
///
/// Entries iterate in insertion order. Cloning is the copy-on-publish
/// snapshot used to share weights with inference threads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    entries: Vec<Entry>,
    by_name: BTreeMap<String, usize>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Matrix) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(invalid(alloc::format!("duplicate parameter name `{name}`")));
        }
        let id = self.entries.len();
        let grad = Matrix::zeros(value.rows(), value.cols());
        self.entries.push(Entry {
            name: name.to_string(),
            value,
            grad,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Matrix {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.entries[id.0].grad
    }

    /// Replaces a value, keeping the shape invariant.
    pub fn set_value(&mut self, id: ParamId, value: Matrix) -> Result<()> {
        let entry = &mut self.entries[id.0];
        if entry.value.shape() != value.shape() {
            return Err(invalid(alloc::format!(
                "shape mismatch for `{}`: {:?} vs {:?}",
                entry.name,
                entry.value.shape(),
                value.shape()
            )));
        }
        entry.value = value;
        Ok(())
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    /// `(name, value)` pairs in ordering-index order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> + '_ {
        self.entries.iter().map(|e| (e.name.as_str(), &e.value))
    }

    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, g: &Matrix) {
        self.entries[id.0].grad.add_assign(g);
    }

    pub fn grad_norm(&self) -> f64 {
        let sq: f64 = self
            .entries
            .iter()
            .flat_map(|e| e.grad.data().iter())
            .map(|g| g * g)
            .sum();
        super::math::sqrt(sq)
    }

    /// Flat scalar addressing across all entries, in ordering-index order.
    pub(crate) fn locate(&self, mut flat: usize) -> (ParamId, usize) {
        for (i, e) in self.entries.iter().enumerate() {
            if flat < e.value.len() {
                return (ParamId(i), flat);
            }
            flat -= e.value.len();
        }
        panic!("flat parameter index out of range");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_ordered() {
        let mut store = ParameterStore::new();
        let a = store.insert("b", Matrix::zeros(1, 2)).unwrap();
        let b = store.insert("a", Matrix::zeros(2, 2)).unwrap();
        assert!(store.insert("a", Matrix::zeros(1, 1)).is_err());
        let names: Vec<_> = store.iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["b", "a"]);
        assert_eq!(store.id("a"), Some(b));
        assert_eq!(store.scalar_count(), 6);
        assert_eq!(store.locate(3), (b, 1));
        assert_eq!(store.locate(1), (a, 1));
        assert_eq!(store.grad(a).shape(), store.value(a).shape());
    }

    #[test]
    fn set_value_checks_shape() {
        let mut store = ParameterStore::new();
        let a = store.insert("w", Matrix::zeros(2, 2)).unwrap();
        assert!(store.set_value(a, Matrix::zeros(1, 2)).is_err());
        assert!(store.set_value(a, Matrix::filled(2, 2, 1.0)).is_ok());
    }
}
