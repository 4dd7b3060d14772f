//! Reference interpreter.

use std::fmt;

use super::ast::{Boundary, Case, Expression, Index, Nesting, Position, Program, RegexToken, Substring};
use super::matching::{match_token, Match};

/// Why a single expression failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalFailure {
    /// The `|index|`-th match of a regex does not exist.
    MissingMatch { regex: RegexToken, index: i64, found: usize },
    /// A resolved range is empty, inverted, or leaves the string.
    BadRange { start: i64, end: i64, len: usize },
    /// The expression produced the empty string.
    EmptyResult,
    /// The input contains characters outside ASCII.
    NonAscii,
}

impl fmt::Display for EvalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalFailure::MissingMatch { regex, index, found } => {
                write!(f, "match {index} of {} requested but only {found} found", regex.name())
            }
            EvalFailure::BadRange { start, end, len } => {
                write!(f, "range [{start}, {end}) invalid for length {len}")
            }
            EvalFailure::EmptyResult => f.write_str("empty result"),
            EvalFailure::NonAscii => f.write_str("input is not ASCII"),
        }
    }
}

/// An evaluation error, tagged with the failing expression's position.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("expression {expression}: {failure}")]
pub struct EvalError {
    pub expression: usize,
    pub failure: EvalFailure,
}

/// Runs `program` on `input`.
pub fn eval_program(program: &Program, input: &str) -> Result<String, EvalError> {
    let mut out = String::new();
    for (i, e) in program.expressions().iter().enumerate() {
        let s = eval_expression(e, input).map_err(|failure| EvalError { expression: i, failure })?;
        out.push_str(&s);
    }
    Ok(out)
}

/// Runs a single expression on `input`.
pub fn eval_expression(e: &Expression, v: &str) -> Result<String, EvalFailure> {
    if !v.is_ascii() {
        return Err(EvalFailure::NonAscii);
    }
    let out = match e {
        Expression::Substring(f) => eval_substring(f, v)?,
        Expression::Nesting(n) => eval_nesting(n, v)?,
        Expression::NestingOfNesting(outer, inner) => {
            let v1 = eval_nesting(inner, v)?;
            eval_nesting(outer, &v1)?
        }
        Expression::NestingOfSubstring(outer, f) => {
            let v1 = eval_substring(f, v)?;
            eval_nesting(outer, &v1)?
        }
        Expression::ConstStr(c) => c.as_char().to_string(),
    };
    non_empty(out)
}

fn non_empty(s: String) -> Result<String, EvalFailure> {
    if s.is_empty() {
        Err(EvalFailure::EmptyResult)
    } else {
        Ok(s)
    }
}

/// Maps a position to a 1-based character index: `k` if positive, otherwise
/// `len + k + 1`, so `-1` is the last character.
pub fn resolve_position(k: Position, len: usize) -> i64 {
    let k = k.get();
    if k > 0 {
        k
    } else {
        len as i64 + k + 1
    }
}

/// Picks the `|i|`-th match from the front (or from the back when `i < 0`).
fn nth_match(matches: &[Match], regex: RegexToken, i: Index) -> Result<&Match, EvalFailure> {
    let i = i.get();
    let n = i.unsigned_abs() as usize;
    if n > matches.len() {
        return Err(EvalFailure::MissingMatch { regex, index: i, found: matches.len() });
    }
    Ok(if i > 0 { &matches[n - 1] } else { &matches[matches.len() - n] })
}

fn gap(m: &Match, y: Boundary) -> usize {
    match y {
        Boundary::Start => m.start,
        Boundary::End => m.end,
    }
}

fn eval_substring(f: &Substring, v: &str) -> Result<String, EvalFailure> {
    match *f {
        Substring::SubStr(k1, k2) => {
            let len = v.len();
            let p1 = resolve_position(k1, len);
            let p2 = resolve_position(k2, len);
            if p1 < 1 || p2 > len as i64 || p1 > p2 {
                return Err(EvalFailure::BadRange { start: p1 - 1, end: p2, len });
            }
            Ok(v[(p1 - 1) as usize..p2 as usize].to_string())
        }
        Substring::GetSpan(r1, i1, y1, r2, i2, y2) => {
            let m1 = match_token(r1, v);
            let g1 = gap(nth_match(&m1, r1, i1)?, y1);
            let m2 = if r2 == r1 { m1 } else { match_token(r2, v) };
            let g2 = gap(nth_match(&m2, r2, i2)?, y2);
            if g1 >= g2 {
                return Err(EvalFailure::BadRange { start: g1 as i64, end: g2 as i64, len: v.len() });
            }
            Ok(v[g1..g2].to_string())
        }
    }
}

fn eval_nesting(n: &Nesting, v: &str) -> Result<String, EvalFailure> {
    let out = match *n {
        Nesting::GetToken(t, i) => {
            let r = RegexToken::Type(t);
            nth_match(&match_token(r, v), r, i)?.text.clone()
        }
        Nesting::ToCase(c) => to_case(c, v),
        Nesting::Replace(a, b) => v.replace(a.as_char(), &b.as_char().to_string()),
        Nesting::Trim => v.trim_matches(|c: char| c.is_ascii_whitespace()).to_string(),
        Nesting::GetUpto(r) => {
            let m = match_token(r, v);
            let first = m.first().ok_or(EvalFailure::MissingMatch { regex: r, index: 1, found: 0 })?;
            v[..first.end].to_string()
        }
        Nesting::GetFrom(r) => {
            let m = match_token(r, v);
            let last = m.last().ok_or(EvalFailure::MissingMatch { regex: r, index: -1, found: 0 })?;
            v[last.end..].to_string()
        }
        Nesting::GetFirst(t, i) => {
            let r = RegexToken::Type(t);
            let m = match_token(r, v);
            let n = i.get() as usize;
            if m.len() < n {
                return Err(EvalFailure::MissingMatch { regex: r, index: i.get(), found: m.len() });
            }
            m[..n].iter().map(|m| m.text.as_str()).collect()
        }
        Nesting::GetAll(t) => {
            let r = RegexToken::Type(t);
            match_token(r, v).iter().map(|m| m.text.as_str()).collect()
        }
    };
    non_empty(out)
}

/// Case conversion. `Proper` capitalizes the first letter of every
/// alphabetic run and lowercases the rest.
pub fn to_case(case: Case, v: &str) -> String {
    match case {
        Case::AllCaps => v.to_ascii_uppercase(),
        Case::Lower => v.to_ascii_lowercase(),
        Case::Proper => {
            let mut out = String::with_capacity(v.len());
            let mut prev_alpha = false;
            for c in v.chars() {
                if c.is_ascii_alphabetic() {
                    out.push(if prev_alpha { c.to_ascii_lowercase() } else { c.to_ascii_uppercase() });
                    prev_alpha = true;
                } else {
                    out.push(c);
                    prev_alpha = false;
                }
            }
            out
        }
    }
}
