//! Synthetic training data: random programs, inputs that the programs can
//! run on, full I/O instances, and character-level noise.

mod constraints;
mod input;
mod instance;
mod noise;

use rand::seq::IndexedRandom;
use rand::Rng;

pub use constraints::{derive_constraints, InputConstraints, SpanOrder, Unsatisfiable};
pub use input::{sample_input, InputConfig};
pub use instance::{read_dataset, write_dataset, Example, Instance, InstanceRecord};
pub use noise::{apply_edit, inject_noise, Edit, NoiseSpec, Side};

use crate::dsl::{
    eval_program, Boundary, Case, ConstChar, Delimiter, Expression, Index, Nesting, Position, Program,
    RegexToken, Substring, TokenType, MAX_PROGRAM_LENGTH,
};

/// Seeded generator used for all sampling. ChaCha8 is portable, so a seed
/// produces the same data on every platform.
pub type SeededRng = rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error)]
pub enum GeneratorError {
    #[error("generation failed after {attempts} attempts: {reason}")]
    GenerationFailure { attempts: usize, reason: String },
    #[error("invalid generator configuration: {0}")]
    Config(String),
}

/// The five expression shapes of the grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExpressionKind {
    Substring,
    Nesting,
    NestingOfNesting,
    NestingOfSubstring,
    ConstStr,
}

impl ExpressionKind {
    pub const ALL: [ExpressionKind; 5] = [
        ExpressionKind::Substring,
        ExpressionKind::Nesting,
        ExpressionKind::NestingOfNesting,
        ExpressionKind::NestingOfSubstring,
        ExpressionKind::ConstStr,
    ];

    pub fn of(e: &Expression) -> ExpressionKind {
        match e {
            Expression::Substring(_) => ExpressionKind::Substring,
            Expression::Nesting(_) => ExpressionKind::Nesting,
            Expression::NestingOfNesting(..) => ExpressionKind::NestingOfNesting,
            Expression::NestingOfSubstring(..) => ExpressionKind::NestingOfSubstring,
            Expression::ConstStr(_) => ExpressionKind::ConstStr,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SubstringFn {
    SubStr,
    GetSpan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NestingFn {
    GetToken,
    ToCase,
    Replace,
    Trim,
    GetUpto,
    GetFrom,
    GetFirst,
    GetAll,
}

impl NestingFn {
    pub const ALL: [NestingFn; 8] = [
        NestingFn::GetToken,
        NestingFn::ToCase,
        NestingFn::Replace,
        NestingFn::Trim,
        NestingFn::GetUpto,
        NestingFn::GetFrom,
        NestingFn::GetFirst,
        NestingFn::GetAll,
    ];
}

/// The slice of the language that programs are sampled from.
#[derive(Clone, Debug)]
pub struct Domain {
    pub max_length: usize,
    /// Relative weights of the expression kinds; a zero weight disables one.
    pub kinds: Vec<(ExpressionKind, f64)>,
    pub substrings: Vec<SubstringFn>,
    /// Functions used standalone and as the inner function of `n1(n2)`.
    pub nestings: Vec<NestingFn>,
    /// Functions allowed as the outer function of a composition.
    pub outer: Vec<NestingFn>,
    pub token_types: Vec<TokenType>,
    pub delimiters: Vec<Delimiter>,
    pub max_position: i64,
    pub max_index: i64,
    pub const_chars: Vec<ConstChar>,
}

impl Domain {
    /// The complete language.
    pub fn full() -> Domain {
        Domain {
            max_length: MAX_PROGRAM_LENGTH,
            kinds: ExpressionKind::ALL.iter().map(|&k| (k, 1.0)).collect(),
            substrings: vec![SubstringFn::SubStr, SubstringFn::GetSpan],
            nestings: NestingFn::ALL.to_vec(),
            outer: NestingFn::ALL.to_vec(),
            token_types: TokenType::ALL.to_vec(),
            delimiters: Delimiter::all().collect(),
            max_position: 100,
            max_index: 5,
            const_chars: ConstChar::all().collect(),
        }
    }

    /// A small slice used for desk-scale training: `SubStr`, `ConstStr`,
    /// `GetToken` over three token types, and `ToCase`, with up to three
    /// expressions per program.
    pub fn toy() -> Domain {
        Domain {
            max_length: 3,
            kinds: vec![
                (ExpressionKind::Substring, 1.0),
                (ExpressionKind::Nesting, 2.0),
                (ExpressionKind::NestingOfNesting, 1.0),
                (ExpressionKind::NestingOfSubstring, 0.5),
                (ExpressionKind::ConstStr, 1.0),
            ],
            substrings: vec![SubstringFn::SubStr],
            nestings: vec![NestingFn::GetToken, NestingFn::ToCase],
            outer: vec![NestingFn::ToCase],
            token_types: vec![TokenType::Number, TokenType::Word, TokenType::AllCaps],
            delimiters: Vec::new(),
            max_position: 6,
            max_index: 3,
            const_chars: " ,.-:;/@#()".chars().map(|c| ConstChar::new(c).unwrap()).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: &str| Err(GeneratorError::Config(m.into()));
        if !(1..=MAX_PROGRAM_LENGTH).contains(&self.max_length) {
            return bad("max_length must lie in 1..=10");
        }
        if !(1..=100).contains(&self.max_position) || !(1..=5).contains(&self.max_index) {
            return bad("position or index bound outside the grammar");
        }
        if self.kinds.iter().all(|&(_, w)| w <= 0.0) {
            return bad("at least one expression kind needs a positive weight");
        }
        let enabled = |k| self.kinds.iter().any(|&(kk, w)| kk == k && w > 0.0);
        if enabled(ExpressionKind::Substring) && self.substrings.is_empty()
            || enabled(ExpressionKind::NestingOfSubstring) && (self.substrings.is_empty() || self.outer.is_empty())
            || enabled(ExpressionKind::Nesting) && self.nestings.is_empty()
            || enabled(ExpressionKind::NestingOfNesting) && (self.nestings.is_empty() || self.outer.is_empty())
            || enabled(ExpressionKind::ConstStr) && self.const_chars.is_empty()
        {
            return bad("an enabled expression kind has no functions to draw from");
        }
        if self.token_types.is_empty() {
            return bad("need at least one token type");
        }
        let uses = |f| self.nestings.contains(&f) || self.outer.contains(&f);
        if uses(NestingFn::Replace) && self.delimiters.len() < 2 {
            return bad("Replace needs at least two delimiters");
        }
        Ok(())
    }

    fn regexes(&self) -> Vec<RegexToken> {
        self.token_types
            .iter()
            .map(|&t| RegexToken::Type(t))
            .chain(self.delimiters.iter().map(|&d| RegexToken::Delim(d)))
            .collect()
    }
}

fn signed<R: Rng + ?Sized>(rng: &mut R, max: i64) -> i64 {
    let k = rng.random_range(1..=max);
    if rng.random_bool(0.5) {
        k
    } else {
        -k
    }
}

fn sample_substring<R: Rng + ?Sized>(rng: &mut R, d: &Domain) -> Substring {
    match d.substrings.choose(rng).expect("validated") {
        SubstringFn::SubStr => {
            let a = Position::new(signed(rng, d.max_position)).unwrap();
            let b = Position::new(signed(rng, d.max_position)).unwrap();
            Substring::SubStr(a, b)
        }
        SubstringFn::GetSpan => {
            let regexes = d.regexes();
            let mut pick = || {
                (
                    *regexes.choose(rng).unwrap(),
                    Index::new(signed(rng, d.max_index)).unwrap(),
                    *Boundary::ALL.choose(rng).unwrap(),
                )
            };
            let (r1, i1, y1) = pick();
            let (r2, i2, y2) = pick();
            Substring::GetSpan(r1, i1, y1, r2, i2, y2)
        }
    }
}

fn sample_nesting<R: Rng + ?Sized>(rng: &mut R, d: &Domain, from: &[NestingFn]) -> Nesting {
    let ty = *d.token_types.choose(rng).unwrap();
    let idx = Index::new(signed(rng, d.max_index)).unwrap();
    match from.choose(rng).expect("validated") {
        NestingFn::GetToken => Nesting::GetToken(ty, idx),
        NestingFn::ToCase => Nesting::ToCase(*Case::ALL.choose(rng).unwrap()),
        NestingFn::Replace => {
            let a = *d.delimiters.choose(rng).unwrap();
            let b = loop {
                let b = *d.delimiters.choose(rng).unwrap();
                if b != a {
                    break b;
                }
            };
            Nesting::Replace(a, b)
        }
        NestingFn::Trim => Nesting::Trim,
        NestingFn::GetUpto => Nesting::GetUpto(*d.regexes().choose(rng).unwrap()),
        NestingFn::GetFrom => Nesting::GetFrom(*d.regexes().choose(rng).unwrap()),
        NestingFn::GetFirst => Nesting::GetFirst(ty, Index::new(rng.random_range(1..=d.max_index)).unwrap()),
        NestingFn::GetAll => Nesting::GetAll(ty),
    }
}

fn sample_expression<R: Rng + ?Sized>(rng: &mut R, d: &Domain) -> Expression {
    let kind = d
        .kinds
        .choose_weighted(rng, |&(_, w)| w.max(0.0))
        .expect("validated: some weight is positive")
        .0;
    match kind {
        ExpressionKind::Substring => Expression::Substring(sample_substring(rng, d)),
        ExpressionKind::Nesting => Expression::Nesting(sample_nesting(rng, d, &d.nestings)),
        ExpressionKind::NestingOfNesting => {
            let outer = sample_nesting(rng, d, &d.outer);
            Expression::NestingOfNesting(outer, sample_nesting(rng, d, &d.nestings))
        }
        ExpressionKind::NestingOfSubstring => {
            let outer = sample_nesting(rng, d, &d.outer);
            Expression::NestingOfSubstring(outer, sample_substring(rng, d))
        }
        ExpressionKind::ConstStr => Expression::ConstStr(*d.const_chars.choose(rng).unwrap()),
    }
}

/// Samples a program: length uniform in `1..=max_length`, each expression
/// drawn independently (kind first, then parameters uniformly).
pub fn sample_program<R: Rng + ?Sized>(rng: &mut R, d: &Domain) -> Program {
    let n = rng.random_range(1..=d.max_length);
    let exprs = (0..n).map(|_| sample_expression(rng, d)).collect();
    Program::new(exprs).expect("sampled expressions are in the grammar")
}

#[derive(Clone, Debug)]
pub struct GeneratorConfig {
    pub domain: Domain,
    pub input: InputConfig,
    pub observed: usize,
    pub assessment: usize,
    pub max_output_len: usize,
    /// Input draws per program before the program is abandoned.
    pub rejections_per_program: usize,
    /// Programs tried before giving up.
    pub max_programs: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            domain: Domain::full(),
            input: InputConfig::default(),
            observed: 4,
            assessment: 6,
            max_output_len: 100,
            rejections_per_program: 50,
            max_programs: 1000,
        }
    }
}

impl GeneratorConfig {
    pub fn toy() -> GeneratorConfig {
        GeneratorConfig {
            domain: Domain::toy(),
            input: InputConfig { min_len: 1, max_len: 20, retries: 50 },
            ..GeneratorConfig::default()
        }
    }
}

/// Draws `count` inputs for `program` and evaluates them, or `None` when the
/// rejection budget runs out.
fn fill_examples<R: Rng + ?Sized>(
    rng: &mut R,
    program: &Program,
    constraints: &InputConstraints,
    cfg: &GeneratorConfig,
    count: usize,
) -> Option<Vec<Example>> {
    let mut out = Vec::with_capacity(count);
    let mut rejections = 0;
    while out.len() < count {
        let accepted = sample_input(rng, constraints, &cfg.input).ok().and_then(|input| {
            let output = eval_program(program, &input).ok()?;
            (!output.is_empty() && output.len() <= cfg.max_output_len).then_some(Example { input, output })
        });
        match accepted {
            Some(e) => out.push(e),
            None => {
                rejections += 1;
                if rejections >= cfg.rejections_per_program {
                    return None;
                }
            }
        }
    }
    Some(out)
}

/// Samples a program together with observed and assessment examples.
pub fn generate_instance<R: Rng + ?Sized>(rng: &mut R, cfg: &GeneratorConfig) -> Result<Instance, GeneratorError> {
    cfg.domain.validate()?;
    let total = cfg.observed + cfg.assessment;
    for _ in 0..cfg.max_programs {
        let program = sample_program(rng, &cfg.domain);
        let Ok(constraints) = derive_constraints(&program) else { continue };
        if let Some(mut examples) = fill_examples(rng, &program, &constraints, cfg, total) {
            let assessment = examples.split_off(cfg.observed);
            return Ok(Instance { observed: examples, assessment, reference: Some(program), noise: 0 });
        }
    }
    Err(GeneratorError::GenerationFailure {
        attempts: cfg.max_programs,
        reason: "no sampled program admitted enough valid inputs".into(),
    })
}

/// Mixes a base seed with a stream number (splitmix64 finalizer), for
/// deriving independent per-batch or per-record generators.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
