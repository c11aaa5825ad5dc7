use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::tensor::Tensor;

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
}

/// Named trainable tensors plus the Adam state that updates them.
///
/// Parameters keep insertion order, which is also their serialization order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    moments: Vec<Moments>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        let n = tensor.values().len();
        self.names.push(name.into());
        self.tensors.push(tensor.trainable());
        self.moments.push(Moments {
            first: vec![0.0; n],
            second: vec![0.0; n],
        });
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Number of Adam updates applied so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(|t| t.values().len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    /// Drops the optimizer state, keeping the parameter values.
    pub fn reset_optimizer(&mut self) {
        self.step = 0;
        for m in &mut self.moments {
            m.first.iter_mut().for_each(|x| *x = 0.0);
            m.second.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of every parameter, then zeroes the grads.
pub fn adam_step(store: &mut ParamStore, lr: f64, beta1: f64, beta2: f64, eps: f64) {
    let t = (store.step + 1) as f64;
    let c1 = 1.0 - libm::pow(beta1, t);
    let c2 = 1.0 - libm::pow(beta2, t);
    for (tensor, m) in store.tensors.iter_mut().zip(&mut store.moments) {
        let (values, grad) = tensor.split_mut();
        let Some(grad) = grad else { continue };
        for i in 0..values.len() {
            let g = grad[i];
            m.first[i] = beta1 * m.first[i] + (1.0 - beta1) * g;
            m.second[i] = beta2 * m.second[i] + (1.0 - beta2) * g * g;
            let m_hat = m.first[i] / c1;
            let v_hat = m.second[i] / c2;
            values[i] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
            grad[i] = 0.0;
        }
    }
    store.step += 1;
}

impl AdamConfig {
    pub fn step(&self, store: &mut ParamStore) {
        adam_step(store, self.lr, self.beta1, self.beta2, self.eps);
    }
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let sq: f64 = store
        .tensors
        .iter()
        .filter_map(Tensor::grad)
        .flat_map(|g| g.iter())
        .map(|g| g * g)
        .sum();
    let norm = libm::sqrt(sq);
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for t in &mut store.tensors {
            if let Some(g) = t.grad_mut() {
                g.iter_mut().for_each(|x| *x *= s);
            }
        }
    }
    norm
}
