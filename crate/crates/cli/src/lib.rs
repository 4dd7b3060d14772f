//! Command-line front end and HTTP service for the programming-by-example
//! engine.

pub mod service;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pbe_core::dsl::{format_program, Vocabulary};
use pbe_core::generator::{
    derive_seed, generate_instance, inject_noise, read_dataset, write_dataset, Domain, Example, GeneratorConfig,
    Instance, NoiseSpec, SeededRng,
};
use pbe_core::metrics::{noise_sweep, Inducer, MetricsReport, Synthesizer, System};
use pbe_core::model::{Architecture, Mode, Model, NetworkConfig, TrainConfig, TrainEvent, Trainer};
use pbe_core::nn::OptimizerKind;
use pbe_core::search::{induce, synthesize, InductionOptions, SelectionMetric, SynthesisOptions};
use rand::SeedableRng;
use sha2::{Digest, Sha256};

use service::{AppState, LoadedModel};

/// Directory holding `synthesis.ckpt` and `induction.ckpt` when no model
/// path is given.
pub const MODEL_DIR_ENV: &str = "ROBUSTFILL_MODEL_DIR";

#[derive(Parser, Debug)]
#[command(name = "pbe", version, about = "Learn string transformations from input/output examples")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a dataset of random instances.
    Sample(SampleArgs),
    /// Train a synthesis or induction model.
    Train(TrainArgs),
    /// Synthesize a program (or induce outputs) for one set of examples.
    Run(RunArgs),
    /// Evaluate a model on a dataset, optionally sweeping noise, beam, and example counts.
    Eval(EvalArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Print the program token vocabulary.
    VocabDump(VocabArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Synthesis,
    Induction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Exact,
    Cer,
}

impl From<MetricArg> for SelectionMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Exact => SelectionMetric::Exact,
            MetricArg::Cer => SelectionMetric::Cer,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Basic,
    AttentionA,
    AttentionB,
    AttentionC,
}

impl From<ArchArg> for Architecture {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Basic => Architecture::Basic,
            ArchArg::AttentionA => Architecture::AttentionA,
            ArchArg::AttentionB => Architecture::AttentionB,
            ArchArg::AttentionC => Architecture::AttentionC,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct DomainArgs {
    /// Use the restricted domain (SubStr, ConstStr, GetToken, ToCase).
    #[arg(long)]
    pub toy: bool,
    /// Most expressions per generated program.
    #[arg(long)]
    pub max_length: Option<usize>,
    /// Observed examples per instance.
    #[arg(long, default_value_t = 4)]
    pub observed: usize,
    /// Assessment examples per instance.
    #[arg(long, default_value_t = 6)]
    pub assessment: usize,
}

impl DomainArgs {
    fn generator(&self) -> GeneratorConfig {
        let mut g = if self.toy { GeneratorConfig::toy() } else { GeneratorConfig::default() };
        if let Some(m) = self.max_length {
            g.domain = Domain { max_length: m, ..g.domain };
        }
        g.observed = self.observed;
        g.assessment = self.assessment;
        g
    }
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Character edits applied to each instance's observed examples.
    #[arg(long, default_value_t = 0)]
    pub noise: usize,
    #[command(flatten)]
    pub domain: DomainArgs,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Where to write the checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    /// Train on a fixed dataset instead of freshly generated instances.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Synthesis)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = ArchArg::AttentionA)]
    pub arch: ArchArg,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 32)]
    pub embedding: usize,
    #[arg(long, default_value_t = 50_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub lr_decay: f64,
    #[arg(long, default_value_t = 10_000)]
    pub lr_every: usize,
    #[arg(long, default_value_t = 5.0)]
    pub clip: f64,
    /// Use Adam instead of plain SGD.
    #[arg(long)]
    pub adam: bool,
    /// Training instances get up to this many character edits.
    #[arg(long, default_value_t = 0)]
    pub noise: usize,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// JSON lines of loss and accuracy.
    #[arg(long)]
    pub metrics_file: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub log_every: usize,
    #[arg(long, default_value_t = 1000)]
    pub validate_every: usize,
    #[arg(long, default_value_t = 5000)]
    pub checkpoint_every: usize,
    /// Stop after this many seconds.
    #[arg(long)]
    pub time_budget: Option<u64>,
    #[command(flatten)]
    pub domain: DomainArgs,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Checkpoint; defaults to the model directory.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Observed pairs as JSON, e.g. '[["January","jan"]]'.
    #[arg(long, conflicts_with = "instances")]
    pub examples: Option<String>,
    /// Dataset file; every instance is run on its assessment inputs.
    #[arg(long)]
    pub instances: Option<PathBuf>,
    /// Inputs to fill in.
    #[arg(long)]
    pub apply: Vec<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::Synthesis)]
    pub mode: ModeArg,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SearchArgs {
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long, value_enum, default_value_t = MetricArg::Exact)]
    pub metric: MetricArg,
    /// Force execution-guided pruning on.
    #[arg(long, conflicts_with = "no_dp")]
    pub dp: bool,
    /// Force execution-guided pruning off.
    #[arg(long)]
    pub no_dp: bool,
    /// With exact selection, fall back to CER when nothing is consistent.
    #[arg(long)]
    pub fallback: bool,
}

impl SearchArgs {
    fn synthesis(&self, beam: usize) -> SynthesisOptions {
        SynthesisOptions {
            beam,
            dp: if self.dp { Some(true) } else if self.no_dp { Some(false) } else { None },
            metric: self.metric.into(),
            fallback_to_cer: self.fallback,
            ..SynthesisOptions::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Synthesis)]
    pub mode: ModeArg,
    /// Beam widths to sweep.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub beams: Vec<usize>,
    /// Noise levels (character edits on observed examples).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub noise: Vec<usize>,
    /// Observed-example counts to sweep; each truncates the observed set.
    #[arg(long, value_delimiter = ',')]
    pub observed: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub search: SearchArgs,
    /// JSON report path; the text table always goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub induction_model: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Allowed CORS origin; repeatable. Any origin when omitted.
    #[arg(long)]
    pub allow_origin: Vec<String>,
}

#[derive(Args, Debug)]
pub struct VocabArgs {
    #[arg(long)]
    pub json: bool,
}

/// A failed command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or input; exit code 2.
    Usage(String),
    /// Anything else; exit code 1.
    Failure(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Failure(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn fail(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Failure(e.into())
}

/// Parses arguments, runs the command, and returns the exit code.
pub fn main_with_args<I, S>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(CliError::Failure(e)) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Sample(a) => sample(&a),
        Command::Train(a) => train(&a, out),
        Command::Run(a) => run_examples(&a, out),
        Command::Eval(a) => eval(&a, out),
        Command::Serve(a) => serve(&a),
        Command::VocabDump(a) => vocab_dump(&a, out),
    }
}

/// The `index`-th sampled instance, independent of the others.
pub fn sample_instance(seed: u64, index: usize, gen: &GeneratorConfig, noise: usize) -> anyhow::Result<Instance> {
    let mut rng = SeededRng::seed_from_u64(derive_seed(seed, index as u64));
    let inst = generate_instance(&mut rng, gen)?;
    Ok(if noise > 0 { inject_noise(&mut rng, &inst, NoiseSpec { chars: noise }) } else { inst })
}

fn sample(a: &SampleArgs) -> CliResult<()> {
    let gen = a.domain.generator();
    gen.domain.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let instances: Vec<Instance> =
        (0..a.count).map(|k| sample_instance(a.seed, k, &gen, a.noise)).collect::<anyhow::Result<_>>()?;
    let f = File::create(&a.out).map_err(fail)?;
    let mut w = BufWriter::new(f);
    write_dataset(&mut w, &instances)?;
    w.flush().map_err(fail)?;
    Ok(())
}

fn load_dataset(path: &Path) -> CliResult<Vec<Instance>> {
    let f = File::open(path).map_err(|e| fail(anyhow::anyhow!("{}: {e}", path.display())))?;
    Ok(read_dataset(BufReader::new(f))?)
}

fn default_model_path(mode: ModeArg) -> CliResult<PathBuf> {
    let dir = std::env::var_os(MODEL_DIR_ENV)
        .ok_or_else(|| CliError::Usage(format!("no --model given and {MODEL_DIR_ENV} is not set")))?;
    let name = match mode {
        ModeArg::Synthesis => "synthesis.ckpt",
        ModeArg::Induction => "induction.ckpt",
    };
    Ok(PathBuf::from(dir).join(name))
}

/// Loads a checkpoint and fingerprints its bytes.
pub fn load_model(path: &Path) -> anyhow::Result<LoadedModel> {
    let bytes = std::fs::read(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let hash: String = Sha256::digest(&bytes).iter().take(8).map(|b| format!("{b:02x}")).collect();
    let model = Model::load(path)?;
    Ok(LoadedModel { model, hash })
}

fn model_for(path: &Option<PathBuf>, mode: ModeArg) -> CliResult<LoadedModel> {
    let path = match path {
        Some(p) => p.clone(),
        None => default_model_path(mode)?,
    };
    let m = load_model(&path)?;
    let want = match mode {
        ModeArg::Synthesis => Mode::Synthesis,
        ModeArg::Induction => Mode::Induction,
    };
    if m.model.config.mode != want {
        return Err(CliError::Usage(format!("{} is not a {mode:?} model", path.display())));
    }
    Ok(m)
}

fn train(a: &TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let mode = match a.mode {
        ModeArg::Synthesis => Mode::Synthesis,
        ModeArg::Induction => Mode::Induction,
    };
    let (model, start) = match &a.resume {
        Some(p) => {
            let (m, step) = Model::<f32>::load_with_step(p).map_err(fail)?;
            if m.config.mode != mode {
                return Err(CliError::Usage(format!("{} is not a {:?} model", p.display(), a.mode)));
            }
            (m, step.unwrap_or(0))
        }
        None => {
            let base = match mode {
                Mode::Synthesis => NetworkConfig::synthesis(a.arch.into()),
                Mode::Induction => NetworkConfig::induction(),
            };
            let cfg = NetworkConfig { hidden: a.hidden, embedding: a.embedding, ..base };
            (Model::new(cfg, derive_seed(a.seed, 1 << 40)).map_err(|e| CliError::Usage(e.to_string()))?, 0)
        }
    };
    let mut cfg = TrainConfig {
        batch_size: a.batch_size,
        steps: a.steps,
        clip: a.clip,
        seed: a.seed,
        generator: a.domain.generator(),
        max_noise: a.noise,
        validate_every: a.validate_every,
        checkpoint: Some(a.out.clone()),
        checkpoint_every: a.checkpoint_every,
        time_budget: a.time_budget.map(Duration::from_secs),
        ..TrainConfig::default()
    };
    cfg.lr.initial = a.lr;
    cfg.lr.decay = a.lr_decay;
    cfg.lr.every = a.lr_every;
    if a.adam {
        cfg.optimizer = OptimizerKind::adam();
    }
    let trainer = match &a.dataset {
        Some(p) => Trainer::with_pool(model, cfg, load_dataset(p)?),
        None => Trainer::new(model, cfg),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?
    .resume_at(start);
    let mut trainer = trainer;
    let mut metrics = match &a.metrics_file {
        Some(p) => Some(BufWriter::new(File::create(p).map_err(fail)?)),
        None => None,
    };
    let mut io_err = None;
    let log_every = a.log_every.max(1);
    let summary = trainer
        .run(|e| {
            let line = match e {
                TrainEvent::Step { step, loss, accuracy, lr, grad_norm } => {
                    if step % log_every != 0 {
                        return;
                    }
                    serde_json::json!({"step": step, "loss": loss, "accuracy": accuracy, "lr": lr, "grad_norm": grad_norm})
                }
                TrainEvent::Validation { step, loss, accuracy } => {
                    serde_json::json!({"step": step, "validation_loss": loss, "validation_accuracy": accuracy})
                }
                TrainEvent::Checkpoint { step, path } => {
                    serde_json::json!({"step": step, "checkpoint": path})
                }
            };
            let r = writeln!(out, "{line}").and_then(|_| match metrics.as_mut() {
                Some(m) => writeln!(m, "{line}"),
                None => Ok(()),
            });
            if let Err(e) = r {
                io_err.get_or_insert(e);
            }
        })
        .map_err(fail)?;
    if let Some(e) = io_err {
        return Err(fail(e));
    }
    if let Some(m) = metrics.as_mut() {
        m.flush().map_err(fail)?;
    }
    writeln!(out, "trained {} steps in {:.1}s -> {}", summary.steps, summary.elapsed.as_secs_f64(), a.out.display())
        .map_err(fail)?;
    Ok(())
}

/// Parses `[["in","out"], ...]`.
pub fn parse_examples(json: &str) -> CliResult<Vec<Example>> {
    let pairs: Vec<(String, String)> =
        serde_json::from_str(json).map_err(|e| CliError::Usage(format!("--examples: {e}")))?;
    if pairs.is_empty() {
        return Err(CliError::Usage("--examples: need at least one pair".into()));
    }
    Ok(pairs.into_iter().map(|(i, o)| Example::new(i, o)).collect())
}

fn run_examples(a: &RunArgs, out: &mut dyn Write) -> CliResult<()> {
    let jobs: Vec<(Vec<Example>, Vec<String>)> = match (&a.examples, &a.instances) {
        (Some(e), None) => vec![(parse_examples(e)?, a.apply.clone())],
        (None, Some(p)) => load_dataset(p)?
            .into_iter()
            .map(|i| {
                let inputs = i.assessment.iter().map(|e| e.input.clone()).chain(a.apply.iter().cloned()).collect();
                (i.observed, inputs)
            })
            .collect(),
        _ => return Err(CliError::Usage("give --examples or --instances".into())),
    };
    let m = model_for(&a.model, a.mode)?;
    for (observed, inputs) in jobs {
        let value = match a.mode {
            ModeArg::Synthesis => {
                let opts = a.search.synthesis(a.search.beam.unwrap_or(10));
                let r = synthesize(&m.model, &observed, &inputs, &opts).map_err(|e| CliError::Usage(e.to_string()))?;
                let program = r.program.as_ref().map(format_program);
                if !a.json {
                    writeln!(out, "program: {}", program.as_deref().unwrap_or("(none)")).map_err(fail)?;
                    writeln!(out, "consistent: {}", r.consistent).map_err(fail)?;
                }
                let fills: Vec<Option<String>> =
                    if r.program.is_some() { r.predictions } else { vec![None; inputs.len()] };
                serde_json::json!({
                    "program": program,
                    "consistent": r.consistent,
                    "candidates": r.candidates_tried,
                    "fills": inputs.iter().zip(&fills).map(|(i, f)| serde_json::json!({"input": i, "output": f})).collect::<Vec<_>>(),
                })
            }
            ModeArg::Induction => {
                let opts = InductionOptions { beam: a.search.beam.unwrap_or(3), ..InductionOptions::default() };
                let outs = induce(&m.model, &observed, &inputs, &opts).map_err(|e| CliError::Usage(e.to_string()))?;
                serde_json::json!({
                    "fills": inputs.iter().zip(&outs).map(|(i, f)| serde_json::json!({"input": i, "output": f})).collect::<Vec<_>>(),
                })
            }
        };
        if a.json {
            writeln!(out, "{value}").map_err(fail)?;
        } else {
            for f in value["fills"].as_array().into_iter().flatten() {
                let o = f["output"].as_str().unwrap_or("(error)");
                writeln!(out, "{}\t{}", f["input"].as_str().unwrap_or(""), o).map_err(fail)?;
            }
        }
    }
    Ok(())
}

fn truncate_observed(instances: &[Instance], n: usize) -> Vec<Instance> {
    instances
        .iter()
        .map(|i| Instance { observed: i.observed.iter().take(n).cloned().collect(), ..i.clone() })
        .collect()
}

/// One report per (beam, observed count) pair, each with a row per noise level.
pub fn eval_reports(
    m: &Model<f32>,
    mode: ModeArg,
    instances: &[Instance],
    a: &EvalArgs,
) -> CliResult<Vec<MetricsReport>> {
    if instances.is_empty() {
        return Err(CliError::Usage("dataset is empty".into()));
    }
    let counts: Vec<Option<usize>> =
        if a.observed.is_empty() { vec![None] } else { a.observed.iter().map(|&n| Some(n)).collect() };
    let mut reports = Vec::new();
    for &beam in &a.beams {
        for &n in &counts {
            let set = match n {
                Some(0) => return Err(CliError::Usage("--observed counts must be positive".into())),
                Some(n) => truncate_observed(instances, n),
                None => instances.to_vec(),
            };
            let synth;
            let ind;
            let sys: &dyn System = match mode {
                ModeArg::Synthesis => {
                    synth = Synthesizer { model: m, options: a.search.synthesis(beam) };
                    &synth
                }
                ModeArg::Induction => {
                    ind = Inducer { model: m, options: InductionOptions { beam, ..InductionOptions::default() } };
                    &ind
                }
            };
            let mut r = noise_sweep(sys, &set, &a.noise, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
            for row in &mut r.rows {
                row.outcomes.clear();
            }
            reports.push(r);
        }
    }
    Ok(reports)
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let m = model_for(&a.model, a.mode)?;
    let instances = load_dataset(&a.dataset)?;
    let reports = eval_reports(&m.model, a.mode, &instances, a)?;
    for r in &reports {
        write!(out, "{}", r.to_text()).map_err(fail)?;
    }
    if let Some(p) = &a.out {
        std::fs::write(p, serde_json::to_string_pretty(&reports).map_err(fail)?).map_err(fail)?;
    }
    Ok(())
}

fn serve(a: &ServeArgs) -> CliResult<()> {
    let load = |p: &Option<PathBuf>, mode: ModeArg| -> CliResult<Option<LoadedModel>> {
        match p {
            Some(_) => model_for(p, mode).map(Some),
            None => match default_model_path(mode) {
                Ok(d) if d.exists() => model_for(&Some(d), mode).map(Some),
                _ => Ok(None),
            },
        }
    };
    let synthesis = load(&a.model, ModeArg::Synthesis)?;
    let induction = load(&a.induction_model, ModeArg::Induction)?;
    if synthesis.is_none() && induction.is_none() {
        return Err(CliError::Usage("no model to serve; pass --model or set the model directory".into()));
    }
    let state = Arc::new(AppState::new(synthesis, induction));
    let app = service::router(state, &a.allow_origin);
    let rt = tokio::runtime::Runtime::new().map_err(fail)?;
    rt.block_on(async {
        let addr = format!("{}:{}", a.host, a.port);
        let listener = tokio::net::TcpListener::bind(&addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
    .map_err(fail)
}

fn vocab_dump(a: &VocabArgs, out: &mut dyn Write) -> CliResult<()> {
    let v = Vocabulary::get();
    if a.json {
        let names: Vec<String> = v.tokens().iter().map(|t| t.name()).collect();
        let j = serde_json::json!({"size": v.len(), "hash": v.hash(), "tokens": names});
        writeln!(out, "{j}").map_err(fail)?;
    } else {
        for (id, t) in v.tokens().iter().enumerate() {
            writeln!(out, "{id}\t{}", t.name()).map_err(fail)?;
        }
    }
    Ok(())
}
