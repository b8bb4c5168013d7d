use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// A named parameter with its gradient buffer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    pub trainable: bool,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Matrix, trainable: bool) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self {
            name: name.into(),
            value,
            grad,
            trainable,
        }
    }
}

/// Index of a parameter inside a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Ordered registry of parameters. Order is insertion order and is stable
/// across save/load.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix, trainable: bool) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        let id = self.params.len();
        self.index.insert(name.clone(), id);
        self.params.push(Param::new(name, value, trainable));
        ParamId(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    #[inline]
    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    #[inline]
    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    /// Number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.len())
            .sum()
    }

    /// A zeroed gradient buffer shaped like this set.
    pub fn grad_buffer(&self) -> GradBuffer {
        GradBuffer {
            grads: self
                .params
                .iter()
                .map(|p| {
                    if p.trainable {
                        Matrix::zeros(p.value.rows(), p.value.cols())
                    } else {
                        Matrix::zeros(0, 0)
                    }
                })
                .collect(),
        }
    }

    /// Adds a buffer into the `grad` fields.
    pub fn accumulate(&mut self, buf: &GradBuffer) {
        for (p, g) in self.params.iter_mut().zip(&buf.grads) {
            if !g.is_empty() {
                p.grad.add_assign(g);
            }
        }
    }

    /// Copies values (not grads) from `other`, which must share layout.
    pub fn copy_values_from(&mut self, other: &ParamSet) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::Validation("parameter sets differ in length".into()));
        }
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            if a.name != b.name || a.value.shape() != b.value.shape() {
                return Err(Error::Validation(format!(
                    "parameter `{}` does not match `{}`",
                    a.name, b.name
                )));
            }
            a.value = b.value.clone();
        }
        Ok(())
    }
}

/// Gradient scratch space aligned with a [`ParamSet`]. Frozen parameters get
/// an empty matrix and writes to them are dropped.
#[derive(Clone, Debug)]
pub struct GradBuffer {
    grads: Vec<Matrix>,
}

impl GradBuffer {
    /// `None` when the parameter is frozen.
    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> Option<&mut Matrix> {
        let g = &mut self.grads[id.0];
        if g.is_empty() {
            None
        } else {
            Some(g)
        }
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.grads[id.0]
    }

    pub fn add_assign(&mut self, other: &GradBuffer) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            if !a.is_empty() {
                a.add_assign(b);
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            g.scale(factor);
        }
    }
}
