//! Encoder/decoder networks for program synthesis and output induction.
//!
//! Every observed example gets its own encoder and decoder replica with
//! shared weights. Decoder states are max-pooled across the examples of an
//! instance at each step before the output layer.

mod layers;
mod session;
mod train;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::dsl::Vocabulary;
use crate::generator::SeededRng;
use crate::nn::{read_checkpoint, write_checkpoint, CheckpointError, Graph, ParamStore, Real, Var};

pub use layers::Memory;
use layers::{Attention, Lstm};
pub use session::{DecoderSession, NeuralState};
pub use train::{
    induction_batch, synthesis_batch, train, DataSource, LrSchedule, TrainConfig, TrainError, TrainEvent, TrainSummary, Trainer,
};

/// Printable ASCII characters, the input alphabet of every encoder.
pub const CHARSET_SIZE: usize = 95;
/// End-of-string symbol of the induction decoder, after the 95 characters.
pub const CHAR_EOS: usize = CHARSET_SIZE;

pub fn char_id(c: char) -> Option<usize> {
    (' '..='~').contains(&c).then(|| c as usize - ' ' as usize)
}

pub fn id_char(id: usize) -> Option<char> {
    (id < CHARSET_SIZE).then(|| (id as u8 + b' ') as char)
}

/// Character ids of `s`.
pub fn encode_chars(s: &str) -> Result<Vec<usize>, ModelError> {
    s.chars().map(|c| char_id(c).ok_or(ModelError::UnknownChar(c))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    /// Plain encoders; each final state seeds the next LSTM.
    Basic,
    /// `O` attends to `I`, the decoder attends to `O`.
    AttentionA,
    /// As A, and the decoder attends to `O` and then to `I`.
    AttentionB,
    /// As B with bidirectional `I` and `O` encoders.
    AttentionC,
}

impl Architecture {
    pub const ALL: [Architecture; 4] =
        [Architecture::Basic, Architecture::AttentionA, Architecture::AttentionB, Architecture::AttentionC];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Basic => "basic",
            Architecture::AttentionA => "attention-a",
            Architecture::AttentionB => "attention-b",
            Architecture::AttentionC => "attention-c",
        }
    }

    pub fn from_name(s: &str) -> Option<Architecture> {
        Architecture::ALL.into_iter().find(|a| a.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Synthesis,
    Induction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub hidden: usize,
    pub embedding: usize,
    pub architecture: Architecture,
    pub mode: Mode,
    /// Most observed examples accepted per instance.
    pub max_examples: usize,
    /// Parameters start uniform in `(-init_scale, init_scale)`.
    pub init_scale: f64,
}

impl NetworkConfig {
    pub fn synthesis(architecture: Architecture) -> NetworkConfig {
        NetworkConfig {
            hidden: 64,
            embedding: 32,
            architecture,
            mode: Mode::Synthesis,
            max_examples: 10,
            init_scale: 0.05,
        }
    }

    pub fn induction() -> NetworkConfig {
        NetworkConfig { mode: Mode::Induction, ..NetworkConfig::synthesis(Architecture::AttentionA) }
    }

    /// Size of the output softmax.
    pub fn output_size(&self) -> usize {
        match self.mode {
            Mode::Synthesis => Vocabulary::get().len(),
            Mode::Induction => CHARSET_SIZE + 1,
        }
    }

    /// Row of the decoder embedding fed at the first step.
    pub fn bos(&self) -> usize {
        match self.mode {
            Mode::Synthesis => Vocabulary::get().len(),
            Mode::Induction => CHARSET_SIZE,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.hidden == 0 || self.embedding == 0 || self.max_examples == 0 {
            return Err(ModelError::Config("sizes must be positive".into()));
        }
        if self.mode == Mode::Induction && self.architecture != Architecture::AttentionA {
            return Err(ModelError::Config("the induction network uses the attention-a encoders".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("character {0:?} is outside printable ASCII")]
    UnknownChar(char),
    #[error("empty string in an example")]
    EmptySequence,
    #[error("expected between 1 and {max} observed examples, got {got}")]
    ExampleCount { got: usize, max: usize },
    #[error("model is configured for {expected:?}, not {found:?}")]
    WrongMode { expected: Mode, found: Mode },
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("checkpoint built for vocabulary {found}, this build has {expected}")]
    VocabMismatch { expected: String, found: String },
    #[error("checkpoint tensor {name}: {problem}")]
    Tensor { name: String, problem: String },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parameter handles of one network.
#[derive(Clone, Debug)]
pub(crate) struct Layers {
    emb_in: crate::nn::ParamId,
    enc_i: Lstm,
    enc_i_bwd: Option<Lstm>,
    proj_i: Option<(crate::nn::ParamId, crate::nn::ParamId)>,
    enc_o: Lstm,
    attn_oi: Option<Attention>,
    enc_o_bwd: Option<(Lstm, Attention)>,
    proj_o: Option<(crate::nn::ParamId, crate::nn::ParamId)>,
    enc_y: Option<Lstm>,
    emb_out: crate::nn::ParamId,
    dec: Lstm,
    attn_a: Option<Attention>,
    attn_b: Option<Attention>,
    pool: crate::nn::ParamId,
    out: crate::nn::ParamId,
}

impl Layers {
    fn build<T: Real>(cfg: &NetworkConfig, store: &mut ParamStore<T>, rng: &mut SeededRng) -> Layers {
        let (d, e, s) = (cfg.hidden, cfg.embedding, cfg.init_scale);
        let mut add = |name: &str, r: usize, c: usize| store.add_uniform(name, r, c, s, rng);
        let attention = cfg.architecture != Architecture::Basic;
        let bidi = cfg.architecture == Architecture::AttentionC;
        let double = matches!(cfg.architecture, Architecture::AttentionB | Architecture::AttentionC)
            || cfg.mode == Mode::Induction;
        let ctx = if attention { d } else { 0 };

        let emb_in = add("emb_in", CHARSET_SIZE, e);
        let enc_i = Lstm::build(&mut add, "enc_i", e, d);
        let enc_i_bwd = bidi.then(|| Lstm::build(&mut add, "enc_i_bwd", e, d));
        let proj_i = bidi.then(|| (add("proj_i.w", 2 * d, d), add("proj_i.b", 1, d)));
        let attn_oi = attention.then(|| Attention::build(&mut add, "attn_oi", d + e, d));
        let enc_o = Lstm::build(&mut add, "enc_o", e + ctx, d);
        let enc_o_bwd = bidi.then(|| {
            (Lstm::build(&mut add, "enc_o_bwd", e + ctx, d), Attention::build(&mut add, "attn_oi_bwd", d + e, d))
        });
        let proj_o = bidi.then(|| (add("proj_o.w", 2 * d, d), add("proj_o.b", 1, d)));
        let enc_y = (cfg.mode == Mode::Induction).then(|| Lstm::build(&mut add, "enc_y", e, d));
        let emb_out = add("emb_out", cfg.bos() + 1, e);
        let attn_a = attention.then(|| Attention::build(&mut add, "attn_a", d + e, d));
        let attn_b = double.then(|| Attention::build(&mut add, "attn_b", 2 * d + e, d));
        let dec_in = e + ctx + if double { d } else { 0 };
        let dec = Lstm::build(&mut add, "dec", dec_in, d);
        let pool_in = if cfg.mode == Mode::Induction { 2 * d } else { d };
        let pool = add("pool.w", pool_in, d);
        let out = add("out.w", d, cfg.output_size());
        Layers {
            emb_in,
            enc_i,
            enc_i_bwd,
            proj_i,
            enc_o,
            attn_oi,
            enc_o_bwd,
            proj_o,
            enc_y,
            emb_out,
            dec,
            attn_a,
            attn_b,
            pool,
            out,
        }
    }
}

/// Encoder outputs for a set of example rows.
pub(crate) struct Encoded {
    pub i_states: Var,
    pub i_lens: Vec<usize>,
    pub o_states: Var,
    pub o_lens: Vec<usize>,
    pub h: Var,
    pub c: Var,
}

#[derive(Clone, Debug)]
pub struct Model<T> {
    pub config: NetworkConfig,
    pub params: ParamStore<T>,
    layers: Layers,
}

impl<T: Real> Model<T> {
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Model<T>, ModelError> {
        config.validate()?;
        let mut params = ParamStore::new();
        let mut rng = SeededRng::seed_from_u64(seed);
        let layers = Layers::build(&config, &mut params, &mut rng);
        Ok(Model { config, params, layers })
    }

    /// Runs the `I` and `O` encoders over `rows` examples.
    pub(crate) fn encode(&self, g: &mut Graph<T>, inputs: &[Vec<usize>], outputs: &[Vec<usize>]) -> Encoded {
        let l = &self.layers;
        let emb = g.param(l.emb_in);
        let rows = inputs.len();
        let own: Vec<usize> = (0..rows).collect();
        let fwd_i = l.enc_i.run(g, emb, inputs, None, None, false);
        let mut back_i = None;
        let (i_states, i_lens) = match (&l.enc_i_bwd, l.proj_i) {
            (Some(bwd), Some((w, b))) => {
                let back = bwd.run(g, emb, inputs, None, None, true);
                back_i = Some((back.h, back.c));
                let both = g.concat_cols(&[fwd_i.states, back.states]);
                let (w, b) = (g.param(w), g.param(b));
                (g.affine(both, w, Some(b)), fwd_i.lens.clone())
            }
            _ => (fwd_i.states, fwd_i.lens.clone()),
        };
        let mem = l.attn_oi.as_ref().map(|a| a.memory(g, i_states, i_lens.clone(), own.clone()));
        let fwd_o = l.enc_o.run(g, emb, outputs, Some((fwd_i.h, fwd_i.c)), l.attn_oi.as_ref().zip(mem.as_ref()), false);
        let o_states = match (&l.enc_o_bwd, l.proj_o) {
            (Some((bwd, attn)), Some((w, b))) => {
                let mem = attn.memory(g, i_states, i_lens.clone(), own);
                let back = bwd.run(g, emb, outputs, back_i, Some((attn, &mem)), true);
                let both = g.concat_cols(&[fwd_o.states, back.states]);
                let (w, b) = (g.param(w), g.param(b));
                g.affine(both, w, Some(b))
            }
            _ => fwd_o.states,
        };
        Encoded { i_states, i_lens, o_states, o_lens: fwd_o.lens, h: fwd_o.h, c: fwd_o.c }
    }

    /// One decoder step for every row. `ids` index the decoder embedding.
    /// Returns the new state and, in induction mode, the query context to
    /// pool alongside it.
    pub(crate) fn decoder_step(
        &self,
        g: &mut Graph<T>,
        ids: Vec<usize>,
        h: Var,
        c: Var,
        mem_a: Option<&Memory>,
        mem_b: Option<&Memory>,
    ) -> (Var, Var, Option<Var>) {
        let l = &self.layers;
        let table = g.param(l.emb_out);
        let x = g.gather_rows(table, ids);
        let mut parts = vec![x];
        let mut ctx_b = None;
        if let (Some(attn), Some(mem)) = (&l.attn_a, mem_a) {
            let q = g.concat_cols(&[h, x]);
            let ctx_a = attn.context(g, q, mem);
            parts.push(ctx_a);
            if let (Some(attn_b), Some(mem_b)) = (&l.attn_b, mem_b) {
                let q = g.concat_cols(&[h, x, ctx_a]);
                let ctx = attn_b.context(g, q, mem_b);
                parts.push(ctx);
                ctx_b = Some(ctx);
            }
        }
        let x = if parts.len() == 1 { x } else { g.concat_cols(&parts) };
        let (h, c) = l.dec.step(g, x, h, c, None);
        let ctx = if self.config.mode == Mode::Induction { ctx_b } else { None };
        (h, c, ctx)
    }

    /// Late pooling: elementwise max over each group of `n` rows of
    /// `tanh([h, ctx] · W)`, where `ctx` is the induction query context.
    pub(crate) fn pool(&self, g: &mut Graph<T>, h: Var, ctx: Option<Var>, n: usize) -> Var {
        let w = g.param(self.layers.pool);
        let h = match ctx {
            Some(ctx) => g.concat_cols(&[h, ctx]),
            None => h,
        };
        let proj = g.affine(h, w, None);
        let act = g.tanh(proj);
        g.max_pool(act, n)
    }

    pub(crate) fn logits(&self, g: &mut Graph<T>, pooled: Var) -> Var {
        let v = g.param(self.layers.out);
        g.affine(pooled, v, None)
    }

    /// Attention memories for the decoder, keyed by `blocks_*` per row.
    pub(crate) fn decoder_memories(
        &self,
        g: &mut Graph<T>,
        enc: &Encoded,
        y: Option<(Var, Vec<usize>, Vec<usize>)>,
    ) -> (Option<Memory>, Option<Memory>) {
        let l = &self.layers;
        let rows: Vec<usize> = (0..enc.o_lens.len()).collect();
        let a = l.attn_a.as_ref().map(|a| a.memory(g, enc.o_states, enc.o_lens.clone(), rows.clone()));
        let b = l.attn_b.as_ref().map(|b| match &y {
            Some((states, lens, blocks)) => b.memory(g, *states, lens.clone(), blocks.clone()),
            None => b.memory(g, enc.i_states, enc.i_lens.clone(), rows.clone()),
        });
        (a, b)
    }

    /// Encodes the query inputs of the induction network, one row each.
    pub(crate) fn encode_query(&self, g: &mut Graph<T>, queries: &[Vec<usize>]) -> (Var, Vec<usize>) {
        let emb = g.param(self.layers.emb_in);
        let enc = self.layers.enc_y.as_ref().expect("induction network").run(g, emb, queries, None, None, false);
        (enc.states, enc.lens)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        self.save_at_step(path, None)
    }

    /// Saves the parameters, recording how many training steps produced them.
    pub fn save_at_step(&self, path: &Path, step: Option<usize>) -> Result<(), ModelError> {
        let meta = serde_json::json!({
            "config": self.config,
            "vocab_hash": Vocabulary::get().hash(),
            "step": step,
        });
        write_checkpoint(BufWriter::new(File::create(path)?), &meta, &self.params)?;
        Ok(())
    }

    /// Loads a checkpoint, refusing one built for a different vocabulary.
    pub fn load(path: &Path) -> Result<Model<T>, ModelError> {
        Ok(Self::load_with_step(path)?.0)
    }

    /// Loads a checkpoint along with its recorded training step, if any.
    pub fn load_with_step(path: &Path) -> Result<(Model<T>, Option<usize>), ModelError> {
        let (meta, stored) = read_checkpoint::<T, _>(BufReader::new(File::open(path)?))?;
        let expected = Vocabulary::get().hash();
        let found = meta["vocab_hash"].as_str().unwrap_or("").to_string();
        if found != expected {
            return Err(ModelError::VocabMismatch { expected: expected.to_string(), found });
        }
        let config: NetworkConfig = serde_json::from_value(meta["config"].clone())
            .map_err(|e| ModelError::Config(format!("bad config in checkpoint: {e}")))?;
        let mut model = Model::new(config, 0)?;
        if stored.len() != model.params.len() {
            return Err(ModelError::Tensor { name: "*".into(), problem: "tensor count differs".into() });
        }
        for id in model.params.ids().collect::<Vec<_>>() {
            let name = model.params.name(id).to_string();
            let src = stored
                .find(&name)
                .map(|p| stored.get(p))
                .ok_or_else(|| ModelError::Tensor { name: name.clone(), problem: "missing".into() })?;
            if src.shape() != model.params.get(id).shape() {
                return Err(ModelError::Tensor { name, problem: "shape differs".into() });
            }
            *model.params.get_mut(id) = src.clone();
        }
        let step = meta["step"].as_u64().map(|s| s as usize);
        Ok((model, step))
    }
}

/// Teacher-forced decoder inputs: BOS, then the target shifted right.
pub(crate) fn shifted_inputs(targets: &[Vec<usize>], bos: usize, steps: usize, n: usize) -> Vec<Vec<usize>> {
    (0..steps)
        .map(|t| {
            targets
                .iter()
                .flat_map(|tg| {
                    let id = if t == 0 { bos } else { tg.get(t - 1).copied().unwrap_or(0) };
                    std::iter::repeat_n(id, n)
                })
                .collect()
        })
        .collect()
}

/// Result of a teacher-forced forward pass.
pub struct Forward {
    pub loss: Var,
    pub logits: Var,
    /// Target per logits row; `None` marks padding.
    pub targets: Vec<Option<usize>>,
    pub tokens: usize,
}

impl Forward {
    /// Rows whose argmax equals the target.
    pub fn correct<T: Real>(&self, g: &Graph<T>) -> usize {
        let l = g.value(self.logits);
        self.targets
            .iter()
            .enumerate()
            .filter(|(r, t)| {
                t.is_some_and(|t| {
                    let row = l.row(*r);
                    let best = (0..row.len()).fold(0, |b, j| if row[j] > row[b] { j } else { b });
                    best == t
                })
            })
            .count()
    }
}

/// Examples of a training batch. All instances share the example count `n`.
#[derive(Clone, Debug)]
pub struct Batch {
    pub n: usize,
    pub inputs: Vec<Vec<usize>>,
    pub outputs: Vec<Vec<usize>>,
    /// Induction only: one query input per instance.
    pub queries: Vec<Vec<usize>>,
    /// Per instance, ending with the end symbol.
    pub targets: Vec<Vec<usize>>,
}

impl<T: Real> Model<T> {
    /// Negative log-likelihood of `batch.targets` under teacher forcing.
    pub fn forward(&self, g: &mut Graph<T>, batch: &Batch) -> Forward {
        let n = batch.n;
        let b = batch.targets.len();
        assert_eq!(batch.inputs.len(), b * n);
        let enc = self.encode(g, &batch.inputs, &batch.outputs);
        let y = (self.config.mode == Mode::Induction).then(|| {
            assert_eq!(batch.queries.len(), b);
            let (states, lens) = self.encode_query(g, &batch.queries);
            (states, lens, (0..b * n).map(|r| r / n).collect())
        });
        let (mem_a, mem_b) = self.decoder_memories(g, &enc, y);
        let steps = batch.targets.iter().map(Vec::len).max().unwrap_or(0);
        let (mut h, mut c) = (enc.h, enc.c);
        let mut pooled = Vec::with_capacity(steps);
        for ids in shifted_inputs(&batch.targets, self.config.bos(), steps, n) {
            let ctx;
            (h, c, ctx) = self.decoder_step(g, ids, h, c, mem_a.as_ref(), mem_b.as_ref());
            pooled.push(self.pool(g, h, ctx, n));
        }
        let stacked = g.stack_time(&pooled, vec![steps; b], false);
        let logits = self.logits(g, stacked);
        let targets: Vec<Option<usize>> =
            batch.targets.iter().flat_map(|tg| (0..steps).map(move |t| tg.get(t).copied())).collect();
        let tokens = targets.iter().flatten().count();
        let loss = g.softmax_ce(logits, targets.clone());
        Forward { loss, logits, targets, tokens }
    }
}
