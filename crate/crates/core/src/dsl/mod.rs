//! The string transformation language: syntax, semantics, text format and
//! token linearization.

mod ast;
mod interp;
mod matching;
mod text;
mod tokens;

pub use ast::*;
pub use interp::{eval_expression, eval_program, resolve_position, to_case, EvalError, EvalFailure};
pub use matching::{count_matches, match_token, Match};
pub use text::{format_expression, format_program, parse_program, ParseError};
pub use tokens::{
    all_nestings, detokenize_program, tokenize_expression, tokenize_program, ProgramParser, SyntaxError,
    Token, Vocabulary, COMPOSE, CONSTSTR, EOS, GETSPAN, SUBSTR,
};

/// A parameter or program outside the grammar's domain.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DslError {
    #[error("{0}")]
    Domain(String),
}
