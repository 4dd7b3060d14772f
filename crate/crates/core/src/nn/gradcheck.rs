//! Central finite-difference gradient checks.

use rand::seq::index::sample;
use rand::Rng;

use super::graph::{Graph, Var};
use super::params::ParamStore;

/// Result for one parameter tensor.
#[derive(Clone, Debug)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    /// Analytic and numeric values at the worst entry.
    pub worst: (f64, f64),
}

/// Compares analytic gradients of the scalar built by `loss` with
/// fourth-order central differences of step `h`, on up to `per_tensor`
/// random entries of every tensor. The relative error is `|a − n| / max(|a|, |n|, floor)`.
pub fn check_gradients<R: Rng + ?Sized>(
    store: &mut ParamStore<f64>,
    loss: impl Fn(&mut Graph<f64>) -> Var,
    h: f64,
    per_tensor: usize,
    floor: f64,
    rng: &mut R,
) -> Vec<TensorCheck> {
    let analytic = {
        let mut g = Graph::new(store);
        let root = loss(&mut g);
        g.backward(root)
    };
    let eval = |s: &ParamStore<f64>| {
        let mut g = Graph::new(s);
        let root = loss(&mut g);
        g.value(root).data[0]
    };
    let ids: Vec<_> = store.ids().collect();
    let mut out = Vec::new();
    for p in ids {
        let n = store.get(p).len();
        let picks = sample(rng, n, per_tensor.min(n));
        let mut worst = 0.0f64;
        let mut worst_pair = (0.0, 0.0);
        for k in picks.iter() {
            let orig = store.get(p).data[k];
            let mut at = |dx: f64| {
                store.get_mut(p).data[k] = orig + dx;
                eval(store)
            };
            let (f2, f1, b1, b2) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
            store.get_mut(p).data[k] = orig;
            let num = (8.0 * (f1 - b1) - (f2 - b2)) / (12.0 * h);
            let ana = analytic.get(p).data[k];
            let rel = (ana - num).abs() / ana.abs().max(num.abs()).max(floor);
            if rel > worst {
                worst = rel;
                worst_pair = (ana, num);
            }
        }
        out.push(TensorCheck { name: store.name(p).to_string(), checked: picks.len(), max_rel_err: worst, worst: worst_pair });
    }
    out
}
