//! Minibatch training on generated or fixed instances.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{encode_chars, Batch, Mode, Model, ModelError, CHAR_EOS};
use crate::dsl::tokenize_program;
use crate::generator::{derive_seed, generate_instance, inject_noise, GeneratorConfig, Instance, NoiseSpec, SeededRng};
use crate::nn::{Graph, Optimizer, OptimizerKind, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    /// Multiplier applied every `every` steps.
    pub decay: f64,
    pub every: usize,
}

impl LrSchedule {
    pub fn at(&self, step: usize) -> f64 {
        self.initial * self.decay.powi((step / self.every.max(1)) as i32)
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: usize,
    pub lr: LrSchedule,
    pub clip: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub generator: GeneratorConfig,
    /// Each training instance gets `Uniform{0..=max_noise}` edits.
    pub max_noise: usize,
    pub validation_size: usize,
    pub validate_every: usize,
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_every: usize,
    /// Stop early rather than let another step run past this much wall time.
    pub time_budget: Option<Duration>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            steps: 50_000,
            lr: LrSchedule { initial: 0.5, decay: 0.5, every: 10_000 },
            clip: 5.0,
            optimizer: OptimizerKind::Sgd,
            seed: 0,
            generator: GeneratorConfig::default(),
            max_noise: 0,
            validation_size: 200,
            validate_every: 1000,
            checkpoint: None,
            checkpoint_every: 5000,
            time_budget: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("non-finite {what} at step {step}")]
    NonFinite { step: usize, what: &'static str },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Generator(#[from] crate::generator::GeneratorError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainEvent {
    Step { step: usize, loss: f64, accuracy: f64, lr: f64, grad_norm: f64 },
    Validation { step: usize, loss: f64, accuracy: f64 },
    Checkpoint { step: usize, path: PathBuf },
}

#[derive(Clone, Debug, Default)]
pub struct TrainSummary {
    pub steps: usize,
    pub last_loss: f64,
    pub last_validation: Option<(f64, f64)>,
    pub elapsed: Duration,
}

/// Turns instances into a synthesis batch; every instance needs a
/// reference program and the same number of observed examples.
pub fn synthesis_batch(instances: &[Instance]) -> Result<Batch, TrainError> {
    let n = instances.first().map_or(0, |i| i.observed.len());
    let mut batch = Batch { n, inputs: vec![], outputs: vec![], queries: vec![], targets: vec![] };
    for inst in instances {
        if inst.observed.len() != n || n == 0 {
            return Err(TrainError::Config("instances in a batch need equal, non-zero example counts".into()));
        }
        let p = inst.reference.as_ref().ok_or_else(|| TrainError::Config("instance has no program".into()))?;
        push_examples(&mut batch, inst)?;
        batch.targets.push(tokenize_program(p));
    }
    Ok(batch)
}

/// Turns instances into an induction batch, predicting one assessment
/// output per instance, chosen by `pick`.
pub fn induction_batch(instances: &[Instance], mut pick: impl FnMut(usize) -> usize) -> Result<Batch, TrainError> {
    let n = instances.first().map_or(0, |i| i.observed.len());
    let mut batch = Batch { n, inputs: vec![], outputs: vec![], queries: vec![], targets: vec![] };
    for inst in instances {
        if inst.observed.len() != n || n == 0 || inst.assessment.is_empty() {
            return Err(TrainError::Config("instances need equal example counts and an assessment pair".into()));
        }
        push_examples(&mut batch, inst)?;
        let q = &inst.assessment[pick(inst.assessment.len())];
        batch.queries.push(encode_chars(&q.input)?);
        let mut t = encode_chars(&q.output)?;
        t.push(CHAR_EOS);
        batch.targets.push(t);
    }
    Ok(batch)
}

fn push_examples(batch: &mut Batch, inst: &Instance) -> Result<(), TrainError> {
    for e in &inst.observed {
        if e.input.is_empty() || e.output.is_empty() {
            return Err(ModelError::EmptySequence.into());
        }
        batch.inputs.push(encode_chars(&e.input)?);
        batch.outputs.push(encode_chars(&e.output)?);
    }
    Ok(())
}

/// Where training instances come from.
#[derive(Clone, Debug)]
pub enum DataSource {
    Generated,
    /// Uniform draws from a fixed pool.
    Pool(Vec<Instance>),
}

pub struct Trainer<T: Real> {
    pub model: Model<T>,
    pub config: TrainConfig,
    optimizer: Optimizer<T>,
    source: DataSource,
    validation: Vec<Instance>,
    step: usize,
}

impl<T: Real> Trainer<T> {
    pub fn new(model: Model<T>, config: TrainConfig) -> Result<Self, TrainError> {
        Self::with_source(model, config, DataSource::Generated)
    }

    pub fn with_pool(model: Model<T>, config: TrainConfig, pool: Vec<Instance>) -> Result<Self, TrainError> {
        if pool.is_empty() {
            return Err(TrainError::Config("empty training pool".into()));
        }
        Self::with_source(model, config, DataSource::Pool(pool))
    }

    fn with_source(model: Model<T>, config: TrainConfig, source: DataSource) -> Result<Self, TrainError> {
        if config.batch_size == 0 || config.clip <= 0.0 {
            return Err(TrainError::Config("batch size must be ≥ 1 and the clip threshold > 0".into()));
        }
        let mut rng = SeededRng::seed_from_u64(derive_seed(config.seed, u64::MAX));
        let validation = match &source {
            DataSource::Generated => (0..config.validation_size)
                .map(|_| generate_instance(&mut rng, &config.generator))
                .collect::<Result<_, _>>()?,
            DataSource::Pool(p) => p.clone(),
        };
        let optimizer = Optimizer::new(config.optimizer, &model.params);
        Ok(Trainer { model, config, optimizer, source, validation, step: 0 })
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Continues from `step`, e.g. after loading a checkpoint. With plain
    /// SGD the following updates match an uninterrupted run.
    pub fn resume_at(mut self, step: usize) -> Self {
        self.step = step;
        self
    }

    /// The instances used at `step`, a pure function of the seed and step.
    pub fn instances_for(&self, step: usize) -> Result<Vec<Instance>, TrainError> {
        let mut rng = SeededRng::seed_from_u64(derive_seed(self.config.seed, step as u64));
        let mut out = Vec::with_capacity(self.config.batch_size);
        for _ in 0..self.config.batch_size {
            let inst = match &self.source {
                DataSource::Generated => generate_instance(&mut rng, &self.config.generator)?,
                DataSource::Pool(p) => p.choose(&mut rng).unwrap().clone(),
            };
            let noise = rng.random_range(0..=self.config.max_noise);
            out.push(if noise > 0 { inject_noise(&mut rng, &inst, NoiseSpec { chars: noise }) } else { inst });
        }
        Ok(out)
    }

    fn batch(&self, instances: &[Instance], rng: &mut SeededRng) -> Result<Batch, TrainError> {
        match self.model.config.mode {
            Mode::Synthesis => synthesis_batch(instances),
            Mode::Induction => induction_batch(instances, |k| rng.random_range(0..k)),
        }
    }

    /// One parameter update. Returns the event describing it.
    pub fn step(&mut self) -> Result<TrainEvent, TrainError> {
        let step = self.step;
        let instances = self.instances_for(step)?;
        let mut rng = SeededRng::seed_from_u64(derive_seed(self.config.seed ^ 0x5eed, step as u64));
        let batch = self.batch(&instances, &mut rng)?;
        let (loss, accuracy, mut grads) = {
            let mut g = Graph::new(&self.model.params);
            let f = self.model.forward(&mut g, &batch);
            let loss = g.value(f.loss).data[0].as_f64();
            let acc = f.correct(&g) as f64 / f.tokens.max(1) as f64;
            let mut grads = g.backward(f.loss);
            let scale = T::from_f64(1.0 / instances.len() as f64);
            for id in self.model.params.ids() {
                grads.get_mut(id).scale(scale);
            }
            (loss / f.tokens.max(1) as f64, acc, grads)
        };
        if !loss.is_finite() {
            return Err(TrainError::NonFinite { step, what: "loss" });
        }
        if !grads.all_finite() {
            return Err(TrainError::NonFinite { step, what: "gradient" });
        }
        let grad_norm = grads.clip(T::from_f64(self.config.clip)).as_f64();
        let lr = self.config.lr.at(step);
        self.optimizer.step(&mut self.model.params, &grads, T::from_f64(lr));
        if !self.model.params.all_finite() {
            return Err(TrainError::NonFinite { step, what: "parameter" });
        }
        self.step += 1;
        Ok(TrainEvent::Step { step, loss, accuracy, lr, grad_norm })
    }

    /// Mean per-token loss and next-token accuracy on the validation set.
    pub fn validate(&self) -> Result<(f64, f64), TrainError> {
        let mut loss = 0.0;
        let mut correct = 0;
        let mut tokens = 0;
        let mut rng = SeededRng::seed_from_u64(derive_seed(self.config.seed, u64::MAX - 1));
        for chunk in self.validation.chunks(self.config.batch_size.max(1)) {
            // Group by example count so each batch is uniform.
            let mut by_n: std::collections::BTreeMap<usize, Vec<Instance>> = Default::default();
            for i in chunk {
                by_n.entry(i.observed.len()).or_default().push(i.clone());
            }
            for group in by_n.values() {
                let batch = self.batch(group, &mut rng)?;
                let mut g = Graph::new(&self.model.params);
                let f = self.model.forward(&mut g, &batch);
                loss += g.value(f.loss).data[0].as_f64();
                correct += f.correct(&g);
                tokens += f.tokens;
            }
        }
        let tokens = tokens.max(1) as f64;
        Ok((loss / tokens, correct as f64 / tokens))
    }

    /// Trains for the configured number of steps, reporting progress.
    pub fn run(&mut self, mut on_event: impl FnMut(&TrainEvent)) -> Result<TrainSummary, TrainError> {
        let start = Instant::now();
        let mut summary = TrainSummary::default();
        let mut slowest = Duration::ZERO;
        while self.step < self.config.steps {
            // Stop when another step could overrun the budget.
            if self.config.time_budget.is_some_and(|b| start.elapsed() + slowest > b) {
                break;
            }
            let t = Instant::now();
            let ev = self.step()?;
            if let TrainEvent::Step { loss, .. } = ev {
                summary.last_loss = loss;
            }
            on_event(&ev);
            let done = self.step;
            if self.config.validate_every > 0 && done % self.config.validate_every == 0 && !self.validation.is_empty() {
                let (loss, accuracy) = self.validate()?;
                summary.last_validation = Some((loss, accuracy));
                on_event(&TrainEvent::Validation { step: done, loss, accuracy });
            }
            if let Some(path) = &self.config.checkpoint {
                if self.config.checkpoint_every > 0 && done % self.config.checkpoint_every == 0 {
                    self.model.save_at_step(path, Some(self.step))?;
                    on_event(&TrainEvent::Checkpoint { step: done, path: path.clone() });
                }
            }
            slowest = slowest.max(t.elapsed());
        }
        if let Some(path) = &self.config.checkpoint {
            self.model.save_at_step(path, Some(self.step))?;
            on_event(&TrainEvent::Checkpoint { step: self.step, path: path.clone() });
        }
        summary.steps = self.step;
        summary.elapsed = start.elapsed();
        Ok(summary)
    }
}

/// Trains `model` on generated data and returns it.
pub fn train<T: Real>(
    model: Model<T>,
    config: TrainConfig,
    on_event: impl FnMut(&TrainEvent),
) -> Result<(Model<T>, TrainSummary), TrainError> {
    let mut t = Trainer::new(model, config)?;
    let summary = t.run(on_event)?;
    Ok((t.model, summary))
}
