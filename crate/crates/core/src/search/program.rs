//! Program decoding: grammar masks, execution-guided pruning, selection,
//! and the synthesis and induction entry points.

use serde::{Deserialize, Serialize};

use super::beam::{beam_search, BeamConfig, Constraint, Decoder, Hypothesis, Unconstrained};
use crate::dsl::{eval_expression, eval_program, Expression, Program, ProgramParser, MAX_PROGRAM_LENGTH};
use crate::generator::Example;
use crate::metrics::pooled_cer;
use crate::model::{id_char, DecoderSession, Model, ModelError, CHAR_EOS};
use crate::nn::Real;

/// Longest token sequence a program of `expressions` expressions can have:
/// nine tokens for a composed `GetSpan`, plus the end token.
pub fn max_program_tokens(expressions: usize) -> usize {
    9 * expressions + 1
}

/// Keeps a partial program iff it evaluates on every observed input to a
/// prefix of the matching output.
pub fn dp_prefix_check(partial: &[Expression], observed: &[Example]) -> bool {
    observed.iter().all(|ex| {
        let mut out = String::new();
        for e in partial {
            match eval_expression(e, &ex.input) {
                Ok(s) => out.push_str(&s),
                Err(_) => return false,
            }
            if !ex.output.starts_with(&out) {
                return false;
            }
        }
        true
    })
}

/// Grammar masks plus, optionally, pruning of prefixes that cannot
/// reproduce the observed outputs.
pub struct ProgramConstraint<'a> {
    observed: &'a [Example],
    dp: bool,
    max_expressions: usize,
}

/// Parser state plus each observed example's output so far.
#[derive(Clone, Debug)]
pub struct ProgramState {
    parser: ProgramParser,
    outputs: Vec<String>,
}

impl ProgramState {
    pub fn parser(&self) -> &ProgramParser {
        &self.parser
    }

    /// Evaluation of the completed expressions on each observed input.
    /// Only tracked when pruning is on.
    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }
}

impl<'a> ProgramConstraint<'a> {
    pub fn new(observed: &'a [Example], dp: bool, max_expressions: usize) -> Self {
        ProgramConstraint { observed, dp, max_expressions }
    }
}

impl Constraint for ProgramConstraint<'_> {
    type State = ProgramState;

    fn start(&self) -> ProgramState {
        ProgramState {
            parser: ProgramParser::new(self.max_expressions),
            outputs: vec![String::new(); if self.dp { self.observed.len() } else { 0 }],
        }
    }

    fn allows(&self, s: &ProgramState, token: usize) -> bool {
        s.parser.accepts(token)
    }

    fn extend(&self, s: &ProgramState, token: usize) -> Option<ProgramState> {
        let mut next = s.clone();
        let done = next.parser.push(token).ok()?;
        if let (true, Some(e)) = (self.dp, done) {
            for (out, ex) in next.outputs.iter_mut().zip(self.observed) {
                out.push_str(&eval_expression(&e, &ex.input).ok()?);
                if !ex.output.starts_with(out.as_str()) {
                    return None;
                }
            }
        }
        Some(next)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMetric {
    Exact,
    Cer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisResult {
    pub program: Option<Program>,
    /// Model score of the selected program.
    pub score: Option<f64>,
    /// Complete candidates the beam returned.
    pub candidates_tried: usize,
    /// The selected program reproduces every observed output.
    pub consistent: bool,
    /// Metric that made the selection.
    pub selection_metric: SelectionMetric,
    /// Pooled CER of the selected program on the observed examples.
    pub cer: Option<f64>,
    /// Selected program applied to each assessment input.
    pub predictions: Vec<Option<String>>,
}

impl SynthesisResult {
    fn empty(candidates_tried: usize, metric: SelectionMetric) -> Self {
        SynthesisResult {
            program: None,
            score: None,
            candidates_tried,
            consistent: false,
            selection_metric: metric,
            cer: None,
            predictions: Vec::new(),
        }
    }
}

fn parse_candidate(tokens: &[usize], max_expressions: usize) -> Option<Program> {
    let mut p = ProgramParser::new(max_expressions);
    for &t in tokens {
        p.push(t).ok()?;
    }
    p.finish()
}

fn candidate_cer(p: &Program, observed: &[Example]) -> f64 {
    let outs: Vec<Option<String>> = observed.iter().map(|e| eval_program(p, &e.input).ok()).collect();
    pooled_cer(outs.iter().zip(observed).map(|(o, e)| (o.as_deref(), e.output.as_str())))
}

/// Picks a program from score-ranked candidates.
///
/// Exact mode takes the best-scoring consistent candidate; with
/// `fallback_to_cer`, an empty exact result falls through to CER mode. CER
/// mode takes the lowest pooled CER, ties going to the better score.
pub fn select_program(
    candidates: &[Hypothesis],
    observed: &[Example],
    metric: SelectionMetric,
    fallback_to_cer: bool,
) -> SynthesisResult {
    let parsed: Vec<(Program, f64)> = candidates
        .iter()
        .filter_map(|h| parse_candidate(&h.tokens, MAX_PROGRAM_LENGTH).map(|p| (p, h.score)))
        .collect();
    let tried = candidates.len();
    let consistent = |p: &Program| observed.iter().all(|e| eval_program(p, &e.input).ok().as_deref() == Some(&e.output));
    if metric == SelectionMetric::Exact {
        if let Some((p, s)) = parsed.iter().find(|(p, _)| consistent(p)) {
            assert!(consistent(p));
            return SynthesisResult {
                program: Some(p.clone()),
                score: Some(*s),
                candidates_tried: tried,
                consistent: true,
                selection_metric: SelectionMetric::Exact,
                cer: Some(0.0),
                predictions: Vec::new(),
            };
        }
        if !fallback_to_cer {
            return SynthesisResult::empty(tried, SelectionMetric::Exact);
        }
    }
    let mut best: Option<(&Program, f64, f64)> = None;
    for (p, s) in &parsed {
        let c = candidate_cer(p, observed);
        if !c.is_finite() {
            continue;
        }
        // Candidates arrive best score first, so strict improvement keeps
        // the better-scored one on ties.
        if best.is_none_or(|(_, bc, _)| c < bc) {
            best = Some((p, c, *s));
        }
    }
    match best {
        Some((p, c, s)) => SynthesisResult {
            program: Some(p.clone()),
            score: Some(s),
            candidates_tried: tried,
            consistent: consistent(p),
            selection_metric: SelectionMetric::Cer,
            cer: Some(c),
            predictions: Vec::new(),
        },
        None => SynthesisResult::empty(tried, SelectionMetric::Cer),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub beam: usize,
    /// Prune by partial execution. `None` turns it on for exact selection
    /// and off for CER selection.
    pub dp: Option<bool>,
    pub metric: SelectionMetric,
    /// In exact mode, fall back to CER when nothing is consistent.
    pub fallback_to_cer: bool,
    pub max_expressions: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            beam: 10,
            dp: None,
            metric: SelectionMetric::Exact,
            fallback_to_cer: false,
            max_expressions: MAX_PROGRAM_LENGTH,
        }
    }
}

impl SynthesisOptions {
    pub fn dp_enabled(&self) -> bool {
        self.dp.unwrap_or(self.metric == SelectionMetric::Exact)
    }
}

/// Beam search plus selection over any program decoder.
pub fn synthesize_with<D: Decoder>(
    decoder: &D,
    observed: &[Example],
    assessment_inputs: &[String],
    opts: &SynthesisOptions,
) -> SynthesisResult {
    let con = ProgramConstraint::new(observed, opts.dp_enabled(), opts.max_expressions);
    let cfg = BeamConfig {
        width: opts.beam.max(1),
        max_len: max_program_tokens(opts.max_expressions),
        finish_at_max_len: false,
    };
    let candidates = beam_search(decoder, &con, &cfg);
    let mut result = select_program(&candidates, observed, opts.metric, opts.fallback_to_cer);
    if let Some(p) = &result.program {
        result.predictions = assessment_inputs.iter().map(|i| eval_program(p, i).ok()).collect();
    }
    result
}

pub fn synthesize<T: Real>(
    model: &Model<T>,
    observed: &[Example],
    assessment_inputs: &[String],
    opts: &SynthesisOptions,
) -> Result<SynthesisResult, ModelError> {
    let session = DecoderSession::synthesis(model, observed)?;
    Ok(synthesize_with(&session, observed, assessment_inputs, opts))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InductionOptions {
    pub beam: usize,
    pub max_chars: usize,
}

impl Default for InductionOptions {
    fn default() -> Self {
        InductionOptions { beam: 3, max_chars: 100 }
    }
}

/// Decodes the output for one query input, character by character.
pub fn induce_with<D: Decoder>(decoder: &D, opts: &InductionOptions) -> String {
    let cfg = BeamConfig { width: opts.beam.max(1), max_len: opts.max_chars + 1, finish_at_max_len: true };
    let best = beam_search(decoder, &Unconstrained, &cfg);
    best.first()
        .map(|h| {
            h.tokens
                .iter()
                .take_while(|&&t| t != CHAR_EOS)
                .take(opts.max_chars)
                .filter_map(|&t| id_char(t))
                .collect()
        })
        .unwrap_or_default()
}

/// Predicts the output of each query, decoding each independently.
pub fn induce<T: Real>(
    model: &Model<T>,
    observed: &[Example],
    queries: &[String],
    opts: &InductionOptions,
) -> Result<Vec<String>, ModelError> {
    queries
        .iter()
        .map(|q| Ok(induce_with(&DecoderSession::induction(model, observed, q)?, opts)))
        .collect()
}
