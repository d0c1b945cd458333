use std::ops::{Index, IndexMut};

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub name: String,
    pub value: Matrix,
}

/// Named parameter slots in a fixed, deterministic order. Slot names are
/// unique and shapes never change after construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterStore {
    slots: Vec<Slot>,
}

/// Gradients share the layout of the parameters they belong to.
pub type GradientStore = ParameterStore;

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a slot and returns its index.
    pub fn push(&mut self, name: impl Into<String>, value: Matrix) -> Result<usize> {
        let name = name.into();
        if self.slots.iter().any(|s| s.name == name) {
            return Err(Error::arg(format!("duplicate slot name `{name}`")));
        }
        self.slots.push(Slot { name, value });
        Ok(self.slots.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn name(&self, i: usize) -> &str {
        &self.slots[i].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }

    pub fn by_name(&self, name: &str) -> Option<&Matrix> {
        self.index_of(name).map(|i| &self.slots[i].value)
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        ParameterStore {
            slots: self
                .slots
                .iter()
                .map(|s| Slot {
                    name: s.name.clone(),
                    value: Matrix::zeros(s.value.rows(), s.value.cols()),
                })
                .collect(),
        }
    }

    pub fn check_congruent(&self, other: &ParameterStore) -> Result<()> {
        if self.slots.len() != other.slots.len() {
            return Err(Error::Shape {
                slot: "<store>".into(),
                expected: (self.slots.len(), 1),
                found: (other.slots.len(), 1),
            });
        }
        for (a, b) in self.slots.iter().zip(&other.slots) {
            if a.name != b.name || a.value.shape() != b.value.shape() {
                return Err(Error::Shape {
                    slot: a.name.clone(),
                    expected: a.value.shape(),
                    found: b.value.shape(),
                });
            }
        }
        Ok(())
    }

    /// Total number of scalar coordinates.
    pub fn coordinate_count(&self) -> usize {
        self.slots.iter().map(|s| s.value.as_slice().len()).sum()
    }

    /// Sum of squared entries over every slot.
    pub fn squared_norm(&self) -> f64 {
        self.slots.iter().map(|s| s.value.squared_norm()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slots.iter().all(|s| s.value.is_finite())
    }

    /// First slot containing a non-finite entry.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.slots
            .iter()
            .find(|s| !s.value.is_finite())
            .map(|s| s.name.as_str())
    }

    /// `self += alpha * other`; the stores must be congruent.
    pub fn axpy(&mut self, alpha: f64, other: &ParameterStore) {
        debug_assert!(self.check_congruent(other).is_ok());
        for (a, b) in self.slots.iter_mut().zip(&other.slots) {
            for (x, y) in a.value.as_mut_slice().iter_mut().zip(b.value.as_slice()) {
                *x += alpha * y;
            }
        }
    }

    pub fn add_assign(&mut self, other: &ParameterStore) {
        self.axpy(1.0, other);
    }

    pub fn scale(&mut self, factor: f64) {
        for s in &mut self.slots {
            for x in s.value.as_mut_slice() {
                *x *= factor;
            }
        }
    }
}

impl Index<usize> for ParameterStore {
    type Output = Matrix;

    fn index(&self, i: usize) -> &Matrix {
        &self.slots[i].value
    }
}

impl IndexMut<usize> for ParameterStore {
    fn index_mut(&mut self, i: usize) -> &mut Matrix {
        &mut self.slots[i].value
    }
}
