use super::{ParamStore, Tensor};

pub const DEFAULT_RHO: f64 = 0.95;
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Running averages of squared gradients and squared updates, one pair of
/// tensors per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaDeltaState {
    pub rho: f64,
    pub epsilon: f64,
    sq_grad: Vec<Tensor>,
    sq_update: Vec<Tensor>,
}

impl AdaDeltaState {
    pub fn new(store: &ParamStore, rho: f64, epsilon: f64) -> Self {
        assert!(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1)");
        assert!(epsilon > 0.0, "epsilon must be positive");
        let zeros = || store.ids().map(|id| Tensor::zeros(store.value(id).shape())).collect();
        AdaDeltaState {
            rho,
            epsilon,
            sq_grad: zeros(),
            sq_update: zeros(),
        }
    }

    pub fn with_defaults(store: &ParamStore) -> Self {
        Self::new(store, DEFAULT_RHO, DEFAULT_EPSILON)
    }

    /// `E[g^2]` for parameter `index`.
    pub fn mean_sq_grad(&self, index: usize) -> &Tensor {
        &self.sq_grad[index]
    }

    /// `E[dx^2]` for parameter `index`.
    pub fn mean_sq_update(&self, index: usize) -> &Tensor {
        &self.sq_update[index]
    }

    /// Applies one update from the store's gradient slots, then zeroes them.
    pub fn step(&mut self, store: &mut ParamStore) {
        assert_eq!(self.sq_grad.len(), store.len(), "state built for a different store");
        let (rho, eps) = (self.rho, self.epsilon);
        for id in store.ids().collect::<Vec<_>>() {
            let grad = store.grad(id).data().to_vec();
            let eg = self.sq_grad[id.index()].data_mut();
            let ex = self.sq_update[id.index()].data_mut();
            let value = store.value_mut(id).data_mut();
            for j in 0..grad.len() {
                let g = grad[j];
                eg[j] = rho * eg[j] + (1.0 - rho) * g * g;
                let dx = -((ex[j] + eps).sqrt() / (eg[j] + eps).sqrt()) * g;
                ex[j] = rho * ex[j] + (1.0 - rho) * dx * dx;
                value[j] += dx;
            }
        }
        store.zero_grads();
    }
}

pub fn adadelta_step(params: &mut ParamStore, state: &mut AdaDeltaState) {
    state.step(params);
}
