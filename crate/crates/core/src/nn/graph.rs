//! Reverse-mode tape over a small set of fused operations.

use super::mat::{gemm_into, sigmoid, Mat, Real};
use super::params::{Grads, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Const,
    Param(ParamId),
    Affine { x: Var, w: Var, b: Option<Var> },
    Add(Var, Var),
    Tanh(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    /// `gates` holds `[i | f | g | o | tanh c]` per row for the backward pass.
    Lstm { pre: Var, c_prev: Var, h_prev: Var, mask: Option<Vec<bool>>, gates: Mat<T> },
    StackTime { steps: Vec<Var>, lens: Vec<usize>, reversed: bool },
    Attend { q: Var, keys: Var, values: Var, blocks: Vec<usize>, lens: Vec<usize>, weights: Vec<T> },
    MaxPool { x: Var, argmax: Vec<usize> },
    SoftmaxCe { logits: Var, targets: Vec<Option<usize>>, probs: Mat<T> },
}

struct Node<T> {
    op: Op<T>,
    value: Mat<T>,
}

/// A computation recorded for one forward pass. Parameters are read from
/// the store and their gradients come back from [`Graph::backward`].
pub struct Graph<'a, T: Real> {
    store: &'a ParamStore<T>,
    nodes: Vec<Node<T>>,
    params: Vec<Option<Var>>,
}

impl<'a, T: Real> Graph<'a, T> {
    pub fn new(store: &'a ParamStore<T>) -> Self {
        Graph { store, nodes: Vec::new(), params: vec![None; store.len()] }
    }

    pub fn store(&self) -> &'a ParamStore<T> {
        self.store
    }

    fn push(&mut self, op: Op<T>, value: Mat<T>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat<T> {
        match self.nodes[v.0].op {
            Op::Param(p) => self.store.get(p),
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn constant(&mut self, m: Mat<T>) -> Var {
        self.push(Op::Const, m)
    }

    pub fn param(&mut self, p: ParamId) -> Var {
        if let Some(v) = self.params[p.0] {
            return v;
        }
        let v = self.push(Op::Param(p), Mat::zeros(0, 0));
        self.params[p.0] = Some(v);
        v
    }

    /// `x · W (+ b)`, with `b` a single row broadcast over rows.
    pub fn affine(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let (xv, wv) = (self.value(x), self.value(w));
        let mut out = Mat::zeros(xv.rows, wv.cols);
        if let Some(b) = b {
            let bv = self.value(b);
            assert_eq!((bv.rows, bv.cols), (1, wv.cols), "bias shape");
            for r in 0..out.rows {
                out.row_mut(r).copy_from_slice(&bv.data);
            }
            gemm_into(&mut out, xv, false, wv, false, T::one());
        } else {
            gemm_into(&mut out, xv, false, wv, false, T::zero());
        }
        self.push(Op::Affine { x, w, b }, out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(Op::Add(a, b), out)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let out = Mat::from_vec(xv.rows, xv.cols, xv.data.iter().map(|v| v.tanh()).collect());
        self.push(Op::Tanh(x), out)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.rows, rows, "concat row mismatch");
            for r in 0..rows {
                out.row_mut(r)[off..off + pv.cols].copy_from_slice(pv.row(r));
            }
            off += pv.cols;
        }
        self.push(Op::ConcatCols(parts.to_vec()), out)
    }

    pub fn slice_cols(&mut self, x: Var, lo: usize, hi: usize) -> Var {
        let xv = self.value(x);
        assert!(lo < hi && hi <= xv.cols, "slice out of range");
        let mut out = Mat::zeros(xv.rows, hi - lo);
        for r in 0..xv.rows {
            out.row_mut(r).copy_from_slice(&xv.row(r)[lo..hi]);
        }
        self.push(Op::SliceCols(x, lo), out)
    }

    /// Rows `ids[i]` of `x`, used for embeddings and beam reordering.
    pub fn gather_rows(&mut self, x: Var, ids: Vec<usize>) -> Var {
        let xv = self.value(x);
        let mut out = Mat::zeros(ids.len(), xv.cols);
        for (i, &r) in ids.iter().enumerate() {
            out.row_mut(i).copy_from_slice(xv.row(r));
        }
        self.push(Op::GatherRows(x, ids), out)
    }

    /// LSTM cell on pre-activations `[i | f | g | o]`. Returns `[h | c]`.
    /// Rows whose mask entry is false carry `(h_prev, c_prev)` unchanged.
    pub fn lstm(&mut self, pre: Var, h_prev: Var, c_prev: Var, mask: Option<Vec<bool>>) -> Var {
        let (pv, hv, cv) = (self.value(pre), self.value(h_prev), self.value(c_prev));
        let d = cv.cols;
        assert_eq!(pv.cols, 4 * d, "pre-activation width");
        assert_eq!((hv.rows, pv.rows), (cv.rows, cv.rows));
        let mut out = Mat::zeros(pv.rows, 2 * d);
        let mut gates = Mat::zeros(pv.rows, 5 * d);
        for r in 0..pv.rows {
            let row = out.row_mut(r);
            if mask.as_ref().is_some_and(|m| !m[r]) {
                row[..d].copy_from_slice(hv.row(r));
                row[d..].copy_from_slice(cv.row(r));
                continue;
            }
            let p = pv.row(r);
            let cp = cv.row(r);
            let gr = gates.row_mut(r);
            for j in 0..d {
                let i = sigmoid(p[j]);
                let f = sigmoid(p[d + j]);
                let g = p[2 * d + j].tanh();
                let o = sigmoid(p[3 * d + j]);
                let c = f * cp[j] + i * g;
                let tc = c.tanh();
                row[d + j] = c;
                row[j] = o * tc;
                gr[j] = i;
                gr[d + j] = f;
                gr[2 * d + j] = g;
                gr[3 * d + j] = o;
                gr[4 * d + j] = tc;
            }
        }
        self.push(Op::Lstm { pre, c_prev, h_prev, mask, gates }, out)
    }

    /// Stacks per-timestep states `steps[t]` (each `R×d`) into an `(R·T)×d`
    /// matrix with row `r·T + t`. When `reversed`, step `t` of a sequence of
    /// length `len` fills row `r·T + len − 1 − t`, and padding rows are zero.
    pub fn stack_time(&mut self, steps: &[Var], lens: Vec<usize>, reversed: bool) -> Var {
        let t_max = steps.len();
        let (rows, d) = self.value(steps[0]).shape();
        assert_eq!(lens.len(), rows);
        let mut out = Mat::zeros(rows * t_max, d);
        for (t, &s) in steps.iter().enumerate() {
            let sv = self.value(s);
            for r in 0..rows {
                if let Some(dst) = stack_row(r, t, lens[r], t_max, reversed) {
                    out.row_mut(dst).copy_from_slice(sv.row(r));
                }
            }
        }
        self.push(Op::StackTime { steps: steps.to_vec(), lens, reversed }, out)
    }

    /// Dot-product attention. Query row `i` attends to rows
    /// `b·T .. b·T + lens[b]` of `keys`/`values`, where `b = blocks[i]` and
    /// `T = keys.rows / lens.len()`.
    pub fn attend(&mut self, q: Var, keys: Var, values: Var, blocks: Vec<usize>, lens: Vec<usize>) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(keys), self.value(values));
        let t_max = kv.rows / lens.len();
        assert_eq!(kv.rows, t_max * lens.len());
        assert_eq!(qv.cols, kv.cols, "query/key width");
        assert_eq!(blocks.len(), qv.rows);
        let mut out = Mat::zeros(qv.rows, vv.cols);
        let mut weights = vec![T::zero(); qv.rows * t_max];
        for (i, &b) in blocks.iter().enumerate() {
            let n = lens[b];
            assert!(n > 0, "attention over an empty sequence");
            let w = &mut weights[i * t_max..i * t_max + n];
            let qr = qv.row(i);
            let mut max = T::neg_infinity();
            for (t, wt) in w.iter_mut().enumerate() {
                *wt = dot(qr, kv.row(b * t_max + t));
                max = max.max(*wt);
            }
            let mut z = T::zero();
            for wt in w.iter_mut() {
                *wt = (*wt - max).exp();
                z = z + *wt;
            }
            let orow = out.row_mut(i);
            for (t, wt) in w.iter_mut().enumerate() {
                *wt = *wt / z;
                axpy(*wt, vv.row(b * t_max + t), orow);
            }
        }
        self.push(Op::Attend { q, keys, values, blocks, lens, weights }, out)
    }

    /// Elementwise max over consecutive row groups of size `group`.
    pub fn max_pool(&mut self, x: Var, group: usize) -> Var {
        let xv = self.value(x);
        assert!(group > 0 && xv.rows % group == 0, "rows not divisible into groups");
        let g = xv.rows / group;
        let mut out = Mat::zeros(g, xv.cols);
        let mut argmax = vec![0; g * xv.cols];
        for k in 0..g {
            for c in 0..xv.cols {
                let mut best = k * group;
                for r in k * group + 1..(k + 1) * group {
                    if xv.get(r, c) > xv.get(best, c) {
                        best = r;
                    }
                }
                out.data[k * xv.cols + c] = xv.get(best, c);
                argmax[k * xv.cols + c] = best;
            }
        }
        self.push(Op::MaxPool { x, argmax }, out)
    }

    /// Summed negative log-likelihood of `targets` under row-wise softmax;
    /// rows with no target are ignored. Returns a `1×1` value.
    pub fn softmax_ce(&mut self, logits: Var, targets: Vec<Option<usize>>) -> Var {
        let lv = self.value(logits);
        assert_eq!(targets.len(), lv.rows);
        let mut probs = Mat::zeros(lv.rows, lv.cols);
        let mut loss = T::zero();
        for (r, t) in targets.iter().enumerate() {
            let Some(t) = *t else { continue };
            let row = lv.row(r);
            let max = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
            let pr = probs.row_mut(r);
            let mut z = T::zero();
            for (p, &x) in pr.iter_mut().zip(row) {
                *p = (x - max).exp();
                z = z + *p;
            }
            for p in pr.iter_mut() {
                *p = *p / z;
            }
            loss = loss - (row[t] - max - z.ln());
        }
        self.push(Op::SoftmaxCe { logits, targets, probs }, Mat::from_vec(1, 1, vec![loss]))
    }

    /// Back-propagates from a scalar node and returns parameter gradients.
    pub fn backward(&self, root: Var) -> Grads<T> {
        assert_eq!(self.value(root).shape(), (1, 1), "backward needs a scalar root");
        let mut grads: Vec<Option<Mat<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Mat::from_vec(1, 1, vec![T::one()]));
        let mut out = Grads::zeros_like(self.store);
        for i in (0..=root.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            self.backward_node(i, dy, &mut grads, &mut out);
        }
        out
    }

    fn backward_node(&self, i: usize, dy: Mat<T>, grads: &mut [Option<Mat<T>>], out: &mut Grads<T>) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Const => {}
            Op::Param(p) => out.get_mut(*p).add_assign(&dy),
            Op::Affine { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                {
                    let dx = slot(grads, *x, xv);
                    gemm_into(dx, &dy, false, wv, true, T::one());
                }
                {
                    let dw = slot(grads, *w, wv);
                    gemm_into(dw, xv, true, &dy, false, T::one());
                }
                if let Some(b) = b {
                    let db = slot(grads, *b, self.value(*b));
                    for r in 0..dy.rows {
                        for (a, &g) in db.data.iter_mut().zip(dy.row(r)) {
                            *a = *a + g;
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                slot(grads, *a, &dy).add_assign(&dy);
                slot(grads, *b, &dy).add_assign(&dy);
            }
            Op::Tanh(x) => {
                let dx = slot(grads, *x, &node.value);
                for ((d, &g), &y) in dx.data.iter_mut().zip(&dy.data).zip(&node.value.data) {
                    *d = *d + g * (T::one() - y * y);
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let pv = self.value(p);
                    let dp = slot(grads, p, pv);
                    for r in 0..dy.rows {
                        add_slice(dp.row_mut(r), &dy.row(r)[off..off + pv.cols]);
                    }
                    off += pv.cols;
                }
            }
            Op::SliceCols(x, lo) => {
                let dx = slot(grads, *x, self.value(*x));
                for r in 0..dy.rows {
                    add_slice(&mut dx.row_mut(r)[*lo..*lo + dy.cols], dy.row(r));
                }
            }
            Op::GatherRows(x, ids) => {
                let dx = slot(grads, *x, self.value(*x));
                for (k, &r) in ids.iter().enumerate() {
                    add_slice(dx.row_mut(r), dy.row(k));
                }
            }
            Op::Lstm { pre, c_prev, h_prev, mask, gates } => {
                let (pv, cv) = (self.value(*pre), self.value(*c_prev));
                let d = cv.cols;
                let mut dpre = Mat::zeros(pv.rows, 4 * d);
                let mut dh_prev = Mat::zeros(pv.rows, d);
                let mut dc_prev = Mat::zeros(pv.rows, d);
                for r in 0..pv.rows {
                    let g = dy.row(r);
                    if mask.as_ref().is_some_and(|m| !m[r]) {
                        dh_prev.row_mut(r).copy_from_slice(&g[..d]);
                        dc_prev.row_mut(r).copy_from_slice(&g[d..]);
                        continue;
                    }
                    let cp = cv.row(r);
                    let gr = gates.row(r);
                    let dp = dpre.row_mut(r);
                    let dcp = &mut dc_prev.data[r * d..(r + 1) * d];
                    for j in 0..d {
                        let (ig, fg, gg, og, tc) = (gr[j], gr[d + j], gr[2 * d + j], gr[3 * d + j], gr[4 * d + j]);
                        let dh = g[j];
                        let dc = g[d + j] + dh * og * (T::one() - tc * tc);
                        dp[j] = dc * gg * ig * (T::one() - ig);
                        dp[d + j] = dc * cp[j] * fg * (T::one() - fg);
                        dp[2 * d + j] = dc * ig * (T::one() - gg * gg);
                        dp[3 * d + j] = dh * tc * og * (T::one() - og);
                        dcp[j] = dc * fg;
                    }
                }
                slot(grads, *pre, pv).add_assign(&dpre);
                slot(grads, *h_prev, &dh_prev).add_assign(&dh_prev);
                slot(grads, *c_prev, &dc_prev).add_assign(&dc_prev);
            }
            Op::StackTime { steps, lens, reversed } => {
                let t_max = steps.len();
                for (t, &s) in steps.iter().enumerate() {
                    let ds = slot(grads, s, self.value(s));
                    for (r, &len) in lens.iter().enumerate() {
                        if let Some(src) = stack_row(r, t, len, t_max, *reversed) {
                            add_slice(ds.row_mut(r), dy.row(src));
                        }
                    }
                }
            }
            Op::Attend { q, keys, values, blocks, lens, weights } => {
                let (qv, kv, vv) = (self.value(*q), self.value(*keys), self.value(*values));
                let t_max = kv.rows / lens.len();
                let mut dq = Mat::zeros(qv.rows, qv.cols);
                let mut dk = Mat::zeros(kv.rows, kv.cols);
                let mut dv = Mat::zeros(vv.rows, vv.cols);
                let mut da = vec![T::zero(); t_max];
                for (i, &b) in blocks.iter().enumerate() {
                    let n = lens[b];
                    let w = &weights[i * t_max..i * t_max + n];
                    let g = dy.row(i);
                    let mut mean = T::zero();
                    for t in 0..n {
                        da[t] = dot(g, vv.row(b * t_max + t));
                        mean = mean + w[t] * da[t];
                        axpy(w[t], g, dv.row_mut(b * t_max + t));
                    }
                    for t in 0..n {
                        let ds = w[t] * (da[t] - mean);
                        axpy(ds, kv.row(b * t_max + t), dq.row_mut(i));
                        axpy(ds, qv.row(i), dk.row_mut(b * t_max + t));
                    }
                }
                slot(grads, *q, qv).add_assign(&dq);
                slot(grads, *keys, kv).add_assign(&dk);
                slot(grads, *values, vv).add_assign(&dv);
            }
            Op::MaxPool { x, argmax } => {
                let dx = slot(grads, *x, self.value(*x));
                let cols = dx.cols;
                for (k, &src) in argmax.iter().enumerate() {
                    let c = k % cols;
                    dx.data[src * cols + c] = dx.data[src * cols + c] + dy.data[k];
                }
            }
            Op::SoftmaxCe { logits, targets, probs } => {
                let scale = dy.data[0];
                let dl = slot(grads, *logits, probs);
                for (r, t) in targets.iter().enumerate() {
                    let Some(t) = *t else { continue };
                    let row = dl.row_mut(r);
                    for (d, &p) in row.iter_mut().zip(probs.row(r)) {
                        *d = *d + scale * p;
                    }
                    row[t] = row[t] - scale;
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn stack_row(r: usize, t: usize, len: usize, t_max: usize, reversed: bool) -> Option<usize> {
    if !reversed {
        Some(r * t_max + t)
    } else if t < len {
        Some(r * t_max + len - 1 - t)
    } else {
        None
    }
}

/// The gradient buffer for `v`, created with the shape of `like`.
fn slot<'g, T: Real>(grads: &'g mut [Option<Mat<T>>], v: Var, like: &Mat<T>) -> &'g mut Mat<T> {
    grads[v.0].get_or_insert_with(|| Mat::zeros(like.rows, like.cols))
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

fn add_slice<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

/// Numerically stable log-softmax of one row.
pub fn log_softmax_row<T: Real>(row: &[T]) -> Vec<T> {
    let max = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let z = row.iter().fold(T::zero(), |acc, &x| acc + (x - max).exp()).ln() + max;
    row.iter().map(|&x| x - z).collect()
}
