//! Recurrent and attention layers on top of the tape.

use crate::nn::{Graph, Mat, ParamId, Real, Var};

#[derive(Clone, Debug)]
pub(crate) struct Lstm {
    w: ParamId,
    b: ParamId,
    d: usize,
}

/// Per-timestep states of a sequence batch, stacked as `(rows·T)×d`, and
/// the final state of each row.
pub(crate) struct SeqOut {
    pub states: Var,
    pub lens: Vec<usize>,
    pub h: Var,
    pub c: Var,
}

impl Lstm {
    pub fn build(add: &mut impl FnMut(&str, usize, usize) -> ParamId, name: &str, input: usize, d: usize) -> Lstm {
        Lstm { w: add(&format!("{name}.w"), input + d, 4 * d), b: add(&format!("{name}.b"), 1, 4 * d), d }
    }

    /// One step: the input (with any attention contexts already
    /// concatenated) and the previous hidden state feed one affine map.
    pub fn step<T: Real>(&self, g: &mut Graph<T>, x: Var, h: Var, c: Var, mask: Option<Vec<bool>>) -> (Var, Var) {
        let xh = g.concat_cols(&[x, h]);
        let (w, b) = (g.param(self.w), g.param(self.b));
        let pre = g.affine(xh, w, Some(b));
        let hc = g.lstm(pre, h, c, mask);
        (g.slice_cols(hc, 0, self.d), g.slice_cols(hc, self.d, 2 * self.d))
    }

    /// Runs over padded character sequences, one per row. Finished rows
    /// carry their state, so the returned final state is each row's state
    /// after its last character. With `attend`, each step's input is
    /// extended with attention over that memory.
    pub fn run<T: Real>(
        &self,
        g: &mut Graph<T>,
        emb: Var,
        seqs: &[Vec<usize>],
        init: Option<(Var, Var)>,
        attend: Option<(&Attention, &Memory)>,
        reversed: bool,
    ) -> SeqOut {
        let rows = seqs.len();
        let lens: Vec<usize> = seqs.iter().map(Vec::len).collect();
        assert!(lens.iter().all(|&l| l > 0), "empty sequence");
        let t_max = *lens.iter().max().expect("at least one row");
        let (mut h, mut c) = init.unwrap_or_else(|| {
            let z = g.constant(Mat::zeros(rows, self.d));
            (z, z)
        });
        let mut steps = Vec::with_capacity(t_max);
        for t in 0..t_max {
            let ids = seqs
                .iter()
                .map(|s| match (t < s.len(), reversed) {
                    (false, _) => 0,
                    (true, false) => s[t],
                    (true, true) => s[s.len() - 1 - t],
                })
                .collect();
            let mask: Vec<bool> = lens.iter().map(|&l| t < l).collect();
            let mask = (!mask.iter().all(|&m| m)).then_some(mask);
            let x = g.gather_rows(emb, ids);
            let x = match attend {
                Some((attn, mem)) => {
                    let q = g.concat_cols(&[h, x]);
                    let ctx = attn.context(g, q, mem);
                    g.concat_cols(&[x, ctx])
                }
                None => x,
            };
            (h, c) = self.step(g, x, h, c, mask);
            steps.push(h);
        }
        let states = g.stack_time(&steps, lens.clone(), reversed);
        SeqOut { states, lens, h, c }
    }
}

/// Source states prepared for attention: `keys = states · W_a`.
#[derive(Clone, Debug)]
pub struct Memory {
    pub keys: Var,
    pub values: Var,
    pub lens: Vec<usize>,
    /// Memory block attended by each query row.
    pub blocks: Vec<usize>,
}

/// "General" attention: score `q · W_a · s` with the query an affine map
/// of the previous hidden state and the current input.
#[derive(Clone, Debug)]
pub(crate) struct Attention {
    wq: ParamId,
    bq: ParamId,
    wa: ParamId,
}

impl Attention {
    pub fn build(add: &mut impl FnMut(&str, usize, usize) -> ParamId, name: &str, query: usize, d: usize) -> Attention {
        Attention {
            wq: add(&format!("{name}.wq"), query, d),
            bq: add(&format!("{name}.bq"), 1, d),
            wa: add(&format!("{name}.wa"), d, d),
        }
    }

    pub fn memory<T: Real>(&self, g: &mut Graph<T>, states: Var, lens: Vec<usize>, blocks: Vec<usize>) -> Memory {
        let wa = g.param(self.wa);
        let keys = g.affine(states, wa, None);
        Memory { keys, values: states, lens, blocks }
    }

    pub fn context<T: Real>(&self, g: &mut Graph<T>, query_in: Var, mem: &Memory) -> Var {
        let (wq, bq) = (g.param(self.wq), g.param(self.bq));
        let q = g.affine(query_in, wq, Some(bq));
        g.attend(q, mem.keys, mem.values, mem.blocks.clone(), mem.lens.clone())
    }
}
