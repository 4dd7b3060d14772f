//! Step-wise decoding against fixed encoder outputs, for beam search.

use super::{encode_chars, Mode, Model, ModelError};
use crate::generator::Example;
use crate::nn::{log_softmax_row, Graph, Mat, Real};
use crate::search::Decoder;

/// Decoder state of one hypothesis: a hidden and cell row per example.
#[derive(Clone, Debug)]
pub struct NeuralState<T> {
    h: Mat<T>,
    c: Mat<T>,
}

struct MemoryMats<T> {
    keys: Mat<T>,
    values: Mat<T>,
    lens: Vec<usize>,
    /// Each example row has its own block; otherwise all rows share block 0.
    per_example: bool,
}

/// A model bound to one set of observed examples (and, for induction, one
/// query input), ready to be stepped by a search procedure.
pub struct DecoderSession<'m, T: Real> {
    model: &'m Model<T>,
    n: usize,
    init: NeuralState<T>,
    mem_a: Option<MemoryMats<T>>,
    mem_b: Option<MemoryMats<T>>,
}

fn check_examples(observed: &[Example], max: usize) -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>), ModelError> {
    if observed.is_empty() || observed.len() > max {
        return Err(ModelError::ExampleCount { got: observed.len(), max });
    }
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for e in observed {
        if e.input.is_empty() || e.output.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        inputs.push(encode_chars(&e.input)?);
        outputs.push(encode_chars(&e.output)?);
    }
    Ok((inputs, outputs))
}

impl<'m, T: Real> DecoderSession<'m, T> {
    pub fn synthesis(model: &'m Model<T>, observed: &[Example]) -> Result<Self, ModelError> {
        Self::build(model, Mode::Synthesis, observed, None)
    }

    pub fn induction(model: &'m Model<T>, observed: &[Example], query: &str) -> Result<Self, ModelError> {
        if query.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        Self::build(model, Mode::Induction, observed, Some(encode_chars(query)?))
    }

    fn build(
        model: &'m Model<T>,
        mode: Mode,
        observed: &[Example],
        query: Option<Vec<usize>>,
    ) -> Result<Self, ModelError> {
        if model.config.mode != mode {
            return Err(ModelError::WrongMode { expected: model.config.mode, found: mode });
        }
        let (inputs, outputs) = check_examples(observed, model.config.max_examples)?;
        let n = observed.len();
        let mut g = Graph::new(&model.params);
        let enc = model.encode(&mut g, &inputs, &outputs);
        let y = query.map(|q| {
            let (states, lens) = model.encode_query(&mut g, &[q]);
            (states, lens, vec![0; n])
        });
        let per_example_b = y.is_none();
        let (a, b) = model.decoder_memories(&mut g, &enc, y);
        let mats = |m: Option<super::Memory>, per_example| {
            m.map(|m| MemoryMats {
                keys: g.value(m.keys).clone(),
                values: g.value(m.values).clone(),
                lens: m.lens,
                per_example,
            })
        };
        let mem_a = mats(a, true);
        let mem_b = mats(b, per_example_b);
        let init = NeuralState { h: g.value(enc.h).clone(), c: g.value(enc.c).clone() };
        Ok(DecoderSession { model, n, init, mem_a, mem_b })
    }

    pub fn examples(&self) -> usize {
        self.n
    }

    fn run(&self, items: &[(&NeuralState<T>, usize)]) -> Vec<(NeuralState<T>, Vec<f64>)> {
        if items.is_empty() {
            return Vec::new();
        }
        let (n, d) = (self.n, self.model.config.hidden);
        let rows = items.len() * n;
        let mut h = Mat::zeros(rows, d);
        let mut c = Mat::zeros(rows, d);
        for (k, (s, _)) in items.iter().enumerate() {
            h.data[k * n * d..(k + 1) * n * d].copy_from_slice(&s.h.data);
            c.data[k * n * d..(k + 1) * n * d].copy_from_slice(&s.c.data);
        }
        let ids = items.iter().flat_map(|&(_, t)| std::iter::repeat_n(t, n)).collect();
        let mut g = Graph::new(&self.model.params);
        let memory = |g: &mut Graph<T>, m: &Option<MemoryMats<T>>| {
            m.as_ref().map(|m| super::Memory {
                keys: g.constant(m.keys.clone()),
                values: g.constant(m.values.clone()),
                lens: m.lens.clone(),
                blocks: (0..rows).map(|r| if m.per_example { r % n } else { 0 }).collect(),
            })
        };
        let mem_a = memory(&mut g, &self.mem_a);
        let mem_b = memory(&mut g, &self.mem_b);
        let (hv, cv) = (g.constant(h), g.constant(c));
        let (h2, c2, ctx) = self.model.decoder_step(&mut g, ids, hv, cv, mem_a.as_ref(), mem_b.as_ref());
        let pooled = self.model.pool(&mut g, h2, ctx, n);
        let logits = self.model.logits(&mut g, pooled);
        let (hm, cm, lm) = (g.value(h2), g.value(c2), g.value(logits));
        (0..items.len())
            .map(|k| {
                let state = NeuralState {
                    h: Mat::from_vec(n, d, hm.data[k * n * d..(k + 1) * n * d].to_vec()),
                    c: Mat::from_vec(n, d, cm.data[k * n * d..(k + 1) * n * d].to_vec()),
                };
                let lp = log_softmax_row(lm.row(k)).into_iter().map(Real::as_f64).collect();
                (state, lp)
            })
            .collect()
    }
}

impl<T: Real> Decoder for DecoderSession<'_, T> {
    type State = NeuralState<T>;

    fn vocab_size(&self) -> usize {
        self.model.config.output_size()
    }

    fn eos(&self) -> usize {
        match self.model.config.mode {
            Mode::Synthesis => crate::dsl::EOS,
            Mode::Induction => super::CHAR_EOS,
        }
    }

    fn start(&self) -> (NeuralState<T>, Vec<f64>) {
        self.run(&[(&self.init, self.model.config.bos())]).pop().expect("one item")
    }

    fn advance(&self, items: &[(&NeuralState<T>, usize)]) -> Vec<(NeuralState<T>, Vec<f64>)> {
        self.run(items)
    }
}
