use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{NumError, Tensor};

/// Handle to one named parameter in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Param {
    name: String,
    value: Tensor,
    grad: Tensor,
}

/// Named trainable tensors, each with a gradient slot of the same shape.
///
/// Parameters keep their insertion order, which is also the order they are
/// written to checkpoints.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId, NumError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(NumError::DuplicateParam(name));
        }
        let id = ParamId(self.params.len());
        let grad = Tensor::zeros(value.shape());
        self.by_name.insert(name.clone(), id);
        self.params.push(Param { name, value, grad });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].grad
    }

    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<(), NumError> {
        let slot = &mut self.params[id.0];
        if slot.value.shape() != value.shape() {
            return Err(NumError::ShapeMismatch {
                op: "set_value",
                left: slot.value.shape().to_vec(),
                right: value.shape().to_vec(),
            });
        }
        slot.value = value;
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Adds a backward pass's gradients into the slots.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (&id, g) in &grads.dense {
            self.params[id].grad.add_assign(g);
        }
        for (&(id, row), g) in &grads.rows {
            let slot = self.params[id].grad.row_mut(row);
            for (a, b) in slot.iter_mut().zip(g) {
                *a += b;
            }
        }
    }

    /// `lambda * sum(theta^2)` over parameters accepted by `include`.
    pub fn l2_penalty(&self, lambda: f64, include: impl Fn(&str) -> bool) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        let sq: f64 = self
            .params
            .iter()
            .filter(|p| include(&p.name))
            .map(|p| p.value.sum_of_squares())
            .sum();
        lambda * sq
    }

    /// Adds `2 * lambda * theta` to the gradient of every included parameter.
    pub fn accumulate_l2_grad(&mut self, lambda: f64, include: impl Fn(&str) -> bool) {
        if lambda == 0.0 {
            return;
        }
        for p in self.params.iter_mut().filter(|p| include(&p.name)) {
            for (g, &x) in p.grad.data_mut().iter_mut().zip(p.value.data()) {
                *g += 2.0 * lambda * x;
            }
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// Gradients from one backward pass, kept apart from the store so several
/// passes can run independently and be merged afterwards.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    pub(crate) dense: BTreeMap<usize, Tensor>,
    /// Rows of embedding-style lookups, keyed by `(param, row)`.
    pub(crate) rows: BTreeMap<(usize, usize), Vec<f64>>,
}

impl Gradients {
    pub(crate) fn add_dense(&mut self, id: ParamId, g: &Tensor) {
        match self.dense.get_mut(&id.0) {
            Some(acc) => acc.add_assign(g),
            None => {
                self.dense.insert(id.0, g.clone());
            }
        }
    }

    pub(crate) fn add_row(&mut self, id: ParamId, row: usize, g: &[f64]) {
        let acc = self.rows.entry((id.0, row)).or_insert_with(|| vec![0.0; g.len()]);
        for (a, b) in acc.iter_mut().zip(g) {
            *a += b;
        }
    }

    /// Sum `other` into `self`.
    pub fn merge(&mut self, other: &Gradients) {
        for (&id, g) in &other.dense {
            self.add_dense(ParamId(id), g);
        }
        for (&(id, row), g) in &other.rows {
            self.add_row(ParamId(id), row, g);
        }
    }

    /// Dense gradient for `id`, materializing row contributions. Mostly for
    /// tests.
    pub fn dense_for(&self, store: &ParamStore, id: ParamId) -> Tensor {
        let mut out = Tensor::zeros(store.value(id).shape());
        if let Some(g) = self.dense.get(&id.0) {
            out.add_assign(g);
        }
        for (&(pid, row), g) in &self.rows {
            if pid == id.0 {
                for (a, b) in out.row_mut(row).iter_mut().zip(g) {
                    *a += b;
                }
            }
        }
        out
    }
}
