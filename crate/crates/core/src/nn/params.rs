//! Named parameter tensors, their gradients, and the update rules.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mat::{Mat, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Mat<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { names: Vec::new(), tensors: Vec::new() }
    }

    /// Adds a tensor drawn uniformly from `(-scale, scale)`.
    pub fn add_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        scale: f64,
        rng: &mut R,
    ) -> ParamId {
        let m = Mat::from_fn(rows, cols, |_, _| T::from_f64(rng.random_range(-scale..scale)));
        self.add(name, m)
    }

    pub fn add(&mut self, name: impl Into<String>, m: Mat<T>) -> ParamId {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(m);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, p: ParamId) -> &Mat<T> {
        &self.tensors[p.0]
    }

    pub fn get_mut(&mut self, p: ParamId) -> &mut Mat<T> {
        &mut self.tensors[p.0]
    }

    pub fn name(&self, p: ParamId) -> &str {
        &self.names[p.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Mat::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Mat::is_finite)
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore { names: self.names.clone(), tensors: self.tensors.iter().map(Mat::cast).collect() }
    }
}

/// One gradient tensor per parameter.
#[derive(Clone, Debug)]
pub struct Grads<T> {
    tensors: Vec<Mat<T>>,
}

impl<T: Real> Grads<T> {
    pub fn zeros_like(store: &ParamStore<T>) -> Self {
        Grads { tensors: store.tensors.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect() }
    }

    pub fn get(&self, p: ParamId) -> &Mat<T> {
        &self.tensors[p.0]
    }

    pub fn get_mut(&mut self, p: ParamId) -> &mut Mat<T> {
        &mut self.tensors[p.0]
    }

    pub fn global_norm(&self) -> T {
        self.tensors.iter().fold(T::zero(), |acc, m| acc + m.sum_squares()).sqrt()
    }

    /// Rescales so the global norm is at most `max_norm`. Returns the norm
    /// before clipping.
    pub fn clip(&mut self, max_norm: T) -> T {
        let norm = self.global_norm();
        if norm > max_norm {
            let s = max_norm / norm;
            for m in &mut self.tensors {
                m.scale(s);
            }
        }
        norm
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Mat::is_finite)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> OptimizerKind {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Applies updates to a parameter store. Adam keeps moment estimates.
#[derive(Clone, Debug)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    m: Vec<Mat<T>>,
    v: Vec<Mat<T>>,
    steps: u64,
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, store: &ParamStore<T>) -> Self {
        let zeros = || store.tensors.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect();
        Optimizer { kind, m: zeros(), v: zeros(), steps: 0 }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &Grads<T>, lr: T) {
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in store.tensors.iter_mut().zip(&grads.tensors) {
                    for (x, &d) in p.data.iter_mut().zip(&g.data) {
                        *x = *x - lr * d;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let (b1, b2, eps) = (T::from_f64(beta1), T::from_f64(beta2), T::from_f64(eps));
                let t = self.steps as i32;
                let c1 = T::one() - b1.powi(t);
                let c2 = T::one() - b2.powi(t);
                for (k, (p, g)) in store.tensors.iter_mut().zip(&grads.tensors).enumerate() {
                    let (m, v) = (&mut self.m[k].data, &mut self.v[k].data);
                    for (j, (x, &d)) in p.data.iter_mut().zip(&g.data).enumerate() {
                        m[j] = b1 * m[j] + (T::one() - b1) * d;
                        v[j] = b2 * v[j] + (T::one() - b2) * d * d;
                        *x = *x - lr * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}
