//! Program linearization over a fixed token vocabulary.
//!
//! Nesting functions are flattened into one token that carries all of their
//! parameters (`GetToken_Word_-1`). `SubStr`, `GetSpan` and `ConstStr` emit a
//! function token followed by one token per parameter. A nested expression
//! `outer(inner)` is introduced by a `Compose` marker, so the first token of
//! every expression determines its shape and the token that completes an
//! expression is always known at the moment it is emitted. `Eos` ends the
//! program.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use super::ast::{
    Boundary, Case, ConstChar, Delimiter, Expression, Index, Nesting, Position, Program, RegexToken,
    Substring, TokenType, MAX_PROGRAM_LENGTH,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    Eos,
    Compose,
    SubStr,
    GetSpan,
    ConstStr,
    Nesting(Nesting),
    Position(Position),
    Index(Index),
    Boundary(Boundary),
    Regex(RegexToken),
    Char(ConstChar),
}

impl Token {
    pub fn name(&self) -> String {
        match self {
            Token::Eos => "EOS".into(),
            Token::Compose => "COMPOSE".into(),
            Token::SubStr => "SubStr".into(),
            Token::GetSpan => "GetSpan".into(),
            Token::ConstStr => "ConstStr".into(),
            Token::Position(k) => format!("Pos_{}", k.get()),
            Token::Index(i) => format!("Idx_{}", i.get()),
            Token::Boundary(b) => b.name().into(),
            Token::Regex(r) => format!("Regex_{}", r.name()),
            Token::Char(c) => format!("Char_{:?}", c.as_char()),
            Token::Nesting(n) => match *n {
                Nesting::GetToken(t, i) => format!("GetToken_{t}_{}", i.get()),
                Nesting::ToCase(c) => format!("ToCase_{}", c.name()),
                Nesting::Replace(a, b) => format!("Replace_{}_{}", a.name(), b.name()),
                Nesting::Trim => "Trim".into(),
                Nesting::GetUpto(r) => format!("GetUpto_{}", r.name()),
                Nesting::GetFrom(r) => format!("GetFrom_{}", r.name()),
                Nesting::GetFirst(t, i) => format!("GetFirst_{t}_{}", i.get()),
                Nesting::GetAll(t) => format!("GetAll_{t}"),
            },
        }
    }
}

/// Every nesting function with every admissible parameter binding.
pub fn all_nestings() -> Vec<Nesting> {
    let mut out = Vec::new();
    for t in TokenType::ALL {
        for i in Index::all() {
            out.push(Nesting::GetToken(t, i));
        }
    }
    out.extend(Case::ALL.into_iter().map(Nesting::ToCase));
    for a in Delimiter::all() {
        for b in Delimiter::all().filter(|&b| b != a) {
            out.push(Nesting::Replace(a, b));
        }
    }
    out.push(Nesting::Trim);
    out.extend(RegexToken::all().map(Nesting::GetUpto));
    out.extend(RegexToken::all().map(Nesting::GetFrom));
    for t in TokenType::ALL {
        for i in Index::positive() {
            out.push(Nesting::GetFirst(t, i));
        }
    }
    out.extend(TokenType::ALL.into_iter().map(Nesting::GetAll));
    out
}

/// The program token vocabulary. Token ids are dense indices; tokens of one
/// kind occupy a contiguous id range.
#[derive(Debug)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    ids: HashMap<Token, usize>,
    nesting: Range<usize>,
    position: Range<usize>,
    index: Range<usize>,
    boundary: Range<usize>,
    regex: Range<usize>,
    chars: Range<usize>,
    hash: String,
}

pub const EOS: usize = 0;
pub const COMPOSE: usize = 1;
pub const SUBSTR: usize = 2;
pub const GETSPAN: usize = 3;
pub const CONSTSTR: usize = 4;

impl Vocabulary {
    fn build() -> Vocabulary {
        let mut tokens = vec![Token::Eos, Token::Compose, Token::SubStr, Token::GetSpan, Token::ConstStr];
        let range = |tokens: &mut Vec<Token>, items: Vec<Token>| {
            let start = tokens.len();
            tokens.extend(items);
            start..tokens.len()
        };
        let nesting = range(&mut tokens, all_nestings().into_iter().map(Token::Nesting).collect());
        let position = range(&mut tokens, Position::all().map(Token::Position).collect());
        let index = range(&mut tokens, Index::all().map(Token::Index).collect());
        let boundary = range(&mut tokens, Boundary::ALL.into_iter().map(Token::Boundary).collect());
        let regex = range(&mut tokens, RegexToken::all().map(Token::Regex).collect());
        let chars = range(&mut tokens, ConstChar::all().map(Token::Char).collect());
        let ids = tokens.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        let mut hasher = Sha256::new();
        for t in &tokens {
            hasher.update(t.name().as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        let hash = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        Vocabulary { tokens, ids, nesting, position, index, boundary, regex, chars, hash }
    }

    /// The process-wide vocabulary.
    pub fn get() -> &'static Vocabulary {
        static VOCAB: OnceLock<Vocabulary> = OnceLock::new();
        VOCAB.get_or_init(Vocabulary::build)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: usize) -> Option<Token> {
        self.tokens.get(id).copied()
    }

    pub fn id(&self, t: Token) -> usize {
        self.ids[&t]
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Short content hash identifying this vocabulary in model checkpoints.
    pub fn hash(&self) -> &str {
        &self.hash
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("token {index}: {message}")]
pub struct SyntaxError {
    pub index: usize,
    pub message: String,
}

fn emit_substring(v: &Vocabulary, f: &Substring, out: &mut Vec<usize>) {
    match *f {
        Substring::SubStr(a, b) => {
            out.extend([SUBSTR, v.id(Token::Position(a)), v.id(Token::Position(b))]);
        }
        Substring::GetSpan(r1, i1, y1, r2, i2, y2) => out.extend([
            GETSPAN,
            v.id(Token::Regex(r1)),
            v.id(Token::Index(i1)),
            v.id(Token::Boundary(y1)),
            v.id(Token::Regex(r2)),
            v.id(Token::Index(i2)),
            v.id(Token::Boundary(y2)),
        ]),
    }
}

pub fn tokenize_expression(e: &Expression) -> Vec<usize> {
    let v = Vocabulary::get();
    let mut out = Vec::new();
    match e {
        Expression::Substring(f) => emit_substring(v, f, &mut out),
        Expression::Nesting(n) => out.push(v.id(Token::Nesting(*n))),
        Expression::NestingOfNesting(a, b) => {
            out.extend([COMPOSE, v.id(Token::Nesting(*a)), v.id(Token::Nesting(*b))])
        }
        Expression::NestingOfSubstring(n, f) => {
            out.extend([COMPOSE, v.id(Token::Nesting(*n))]);
            emit_substring(v, f, &mut out);
        }
        Expression::ConstStr(c) => out.extend([CONSTSTR, v.id(Token::Char(*c))]),
    }
    out
}

/// Linearizes a program; the result always ends with `EOS`.
pub fn tokenize_program(p: &Program) -> Vec<usize> {
    let mut out: Vec<usize> = p.expressions().iter().flat_map(tokenize_expression).collect();
    out.push(EOS);
    out
}

/// Inverse of [`tokenize_program`].
pub fn detokenize_program(tokens: &[usize]) -> Result<Program, SyntaxError> {
    let mut parser = ProgramParser::new(MAX_PROGRAM_LENGTH);
    for (i, &t) in tokens.iter().enumerate() {
        if parser.is_done() {
            return Err(SyntaxError { index: i, message: "token after EOS".into() });
        }
        parser.push(t).map_err(|message| SyntaxError { index: i, message })?;
    }
    if !parser.is_done() {
        return Err(SyntaxError { index: tokens.len(), message: "missing EOS".into() });
    }
    Program::new(parser.expressions).map_err(|e| SyntaxError { index: tokens.len(), message: e.to_string() })
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum State {
    ExprStart,
    AfterCompose,
    AfterOuter(Nesting),
    SubStr { outer: Option<Nesting>, first: Option<Position> },
    GetSpan { outer: Option<Nesting>, args: Vec<Token> },
    Const,
    Done,
}

/// Incremental parser over program tokens. Drives both detokenization and
/// grammar-constrained decoding.
#[derive(Clone, Debug)]
pub struct ProgramParser {
    state: State,
    expressions: Vec<Expression>,
    max_length: usize,
}

const GETSPAN_KINDS: [fn(&Token) -> bool; 6] = [
    |t| matches!(t, Token::Regex(_)),
    |t| matches!(t, Token::Index(_)),
    |t| matches!(t, Token::Boundary(_)),
    |t| matches!(t, Token::Regex(_)),
    |t| matches!(t, Token::Index(_)),
    |t| matches!(t, Token::Boundary(_)),
];

impl ProgramParser {
    pub fn new(max_length: usize) -> ProgramParser {
        ProgramParser { state: State::ExprStart, expressions: Vec::new(), max_length }
    }

    pub fn is_done(&self) -> bool {
        self.state == State::Done
    }

    /// True between expressions (the last pushed token completed one).
    pub fn at_expression_start(&self) -> bool {
        self.state == State::ExprStart
    }

    pub fn expressions(&self) -> &[Expression] {
        &self.expressions
    }

    /// Whether `id` is a legal next token.
    pub fn accepts(&self, id: usize) -> bool {
        let v = Vocabulary::get();
        let in_range = |r: &Range<usize>| r.contains(&id);
        match &self.state {
            State::ExprStart => {
                if self.expressions.len() >= self.max_length {
                    id == EOS
                } else if id == EOS {
                    !self.expressions.is_empty()
                } else {
                    matches!(id, COMPOSE | SUBSTR | GETSPAN | CONSTSTR) || in_range(&v.nesting)
                }
            }
            State::AfterCompose => in_range(&v.nesting),
            State::AfterOuter(_) => in_range(&v.nesting) || id == SUBSTR || id == GETSPAN,
            State::SubStr { .. } => in_range(&v.position),
            State::GetSpan { args, .. } => match args.len() {
                0 | 3 => in_range(&v.regex),
                1 | 4 => in_range(&v.index),
                _ => in_range(&v.boundary),
            },
            State::Const => in_range(&v.chars),
            State::Done => false,
        }
    }

    /// Consumes one token. Returns the expression it completed, if any.
    pub fn push(&mut self, id: usize) -> Result<Option<Expression>, String> {
        let v = Vocabulary::get();
        if !self.accepts(id) {
            let name = v.token(id).map_or_else(|| format!("id {id}"), |t| t.name());
            return Err(format!("{name} not allowed here"));
        }
        let tok = v.token(id).expect("accepted ids are in the vocabulary");
        let (next, done) = match (std::mem::replace(&mut self.state, State::Done), tok) {
            (State::ExprStart, Token::Eos) => (State::Done, None),
            (State::ExprStart, Token::Compose) => (State::AfterCompose, None),
            (State::ExprStart, Token::Nesting(n)) => (State::ExprStart, Some(Expression::Nesting(n))),
            (State::ExprStart, Token::SubStr) => (State::SubStr { outer: None, first: None }, None),
            (State::ExprStart, Token::GetSpan) => (State::GetSpan { outer: None, args: vec![] }, None),
            (State::ExprStart, Token::ConstStr) => (State::Const, None),
            (State::AfterCompose, Token::Nesting(n)) => (State::AfterOuter(n), None),
            (State::AfterOuter(o), Token::Nesting(n)) => {
                (State::ExprStart, Some(Expression::NestingOfNesting(o, n)))
            }
            (State::AfterOuter(o), Token::SubStr) => (State::SubStr { outer: Some(o), first: None }, None),
            (State::AfterOuter(o), Token::GetSpan) => {
                (State::GetSpan { outer: Some(o), args: vec![] }, None)
            }
            (State::SubStr { outer, first: None }, Token::Position(k)) => {
                (State::SubStr { outer, first: Some(k) }, None)
            }
            (State::SubStr { outer, first: Some(k1) }, Token::Position(k2)) => {
                (State::ExprStart, Some(wrap(outer, Substring::SubStr(k1, k2))))
            }
            (State::GetSpan { outer, mut args }, t) => {
                debug_assert!(GETSPAN_KINDS[args.len()](&t));
                args.push(t);
                if args.len() == 6 {
                    let f = getspan_from(&args);
                    (State::ExprStart, Some(wrap(outer, f)))
                } else {
                    (State::GetSpan { outer, args }, None)
                }
            }
            (State::Const, Token::Char(c)) => (State::ExprStart, Some(Expression::ConstStr(c))),
            (s, t) => unreachable!("accepts() admitted {t:?} in state {s:?}"),
        };
        self.state = next;
        if let Some(e) = done {
            self.expressions.push(e);
        }
        Ok(done)
    }

    /// Consumes the parser, returning the program if `EOS` has been seen.
    pub fn finish(self) -> Option<Program> {
        if self.is_done() {
            Program::new(self.expressions).ok()
        } else {
            None
        }
    }
}

fn wrap(outer: Option<Nesting>, f: Substring) -> Expression {
    match outer {
        Some(n) => Expression::NestingOfSubstring(n, f),
        None => Expression::Substring(f),
    }
}

fn getspan_from(args: &[Token]) -> Substring {
    match args {
        [Token::Regex(r1), Token::Index(i1), Token::Boundary(y1), Token::Regex(r2), Token::Index(i2), Token::Boundary(y2)] => {
            Substring::GetSpan(*r1, *i1, *y1, *r2, *i2, *y2)
        }
        _ => unreachable!("GetSpan arguments are kind-checked on entry"),
    }
}
