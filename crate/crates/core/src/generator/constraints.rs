//! Input constraints derived from a program.
//!
//! A program only runs on inputs that contain the tokens it asks for. The
//! constraints here are sufficient conditions checked directly on a
//! candidate input, so an input that satisfies them runs without error,
//! apart from the rare emptiness cases (`GetFrom` on a trailing match and
//! the like) that the instance generator rejects by evaluation.

use std::collections::{BTreeMap, BTreeSet};

use crate::dsl::{
    match_token, Boundary, Case, Delimiter, Expression, Index, Nesting, Program, RegexToken, Substring, TokenType,
};

/// No input can make this program run.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("no input satisfies expression {expression}: {reason}")]
pub struct Unsatisfiable {
    pub expression: usize,
    pub reason: String,
}

/// The operands of a `GetSpan` whose gaps must be strictly ordered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SpanOrder {
    pub r1: RegexToken,
    pub i1: Index,
    pub y1: Boundary,
    pub r2: RegexToken,
    pub i2: Index,
    pub y2: Boundary,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InputConstraints {
    pub min_len: usize,
    pub max_len: Option<usize>,
    /// Minimum number of matches per regex.
    pub counts: BTreeMap<RegexToken, usize>,
    pub spans: Vec<SpanOrder>,
    /// Regexes whose last match must be followed by at least one character.
    pub tails: BTreeSet<RegexToken>,
}

impl InputConstraints {
    fn require(&mut self, r: RegexToken, n: usize) {
        let c = self.counts.entry(r).or_insert(0);
        *c = (*c).max(n);
    }

    /// Checks `v` against every constraint. Every input must also hold at
    /// least one non-whitespace character.
    pub fn satisfied_by(&self, v: &str) -> bool {
        if !v.is_ascii() || v.len() < self.min_len.max(1) || self.max_len.is_some_and(|m| v.len() > m) {
            return false;
        }
        if v.bytes().all(|b| b.is_ascii_whitespace()) {
            return false;
        }
        if self.counts.iter().any(|(&r, &n)| match_token(r, v).len() < n) {
            return false;
        }
        if self.tails.iter().any(|&r| match_token(r, v).last().is_none_or(|m| m.end >= v.len())) {
            return false;
        }
        self.spans.iter().all(|s| span_gaps(s, v).is_some_and(|(g1, g2)| g1 < g2))
    }
}

fn span_gaps(s: &SpanOrder, v: &str) -> Option<(usize, usize)> {
    let gap = |r: RegexToken, i: Index, y: Boundary| {
        let m = match_token(r, v);
        let n = i.get().unsigned_abs() as usize;
        if n > m.len() {
            return None;
        }
        let m = if i.get() > 0 { &m[n - 1] } else { &m[m.len() - n] };
        Some(match y {
            Boundary::Start => m.start,
            Boundary::End => m.end,
        })
    };
    Some((gap(s.r1, s.i1, s.y1)?, gap(s.r2, s.i2, s.y2)?))
}

/// What is known about the string an inner function returns.
#[derive(Clone, Copy, Debug)]
enum Shape {
    /// The input with its case changed.
    Cased(Case),
    /// The input with one delimiter swapped for another.
    Replaced(Delimiter, Delimiter),
    /// The input with surrounding whitespace removed.
    Trimmed,
    /// Built only from at least `n` matches of `r`. When `glued` is set,
    /// consecutive matches may have merged into one run.
    Tokens { r: RegexToken, n: usize, glued: bool },
    Opaque,
}

/// Token types `u` such that every match of `t` contains a match of `u`.
fn contains(t: TokenType, u: TokenType) -> bool {
    use TokenType::*;
    match t {
        Number | Digit => matches!(u, Number | Digit | Alphanum | Char),
        Word => matches!(u, Word | Alphanum | Char),
        Alphanum => matches!(u, Alphanum | Char),
        AllCaps => matches!(u, AllCaps | Word | Alphanum | Char),
        PropCase => matches!(u, PropCase | Word | Alphanum | Char | AllCaps | Lower),
        Lower => matches!(u, Lower | Word | Alphanum | Char),
        Char => matches!(u, Alphanum | Char),
    }
}

fn single_char(t: TokenType) -> bool {
    matches!(t, TokenType::Digit | TokenType::Char)
}

/// Token types whose matches do not depend on letter case.
fn case_blind(t: TokenType) -> bool {
    matches!(t, TokenType::Number | TokenType::Digit | TokenType::Word | TokenType::Alphanum | TokenType::Char)
}

/// Matches of `r` that an outer function needs, and whether it needs
/// text after the last one.
fn demand(n: &Nesting) -> Option<(RegexToken, usize, bool)> {
    match *n {
        Nesting::GetToken(t, i) => Some((RegexToken::Type(t), i.get().unsigned_abs() as usize, false)),
        Nesting::GetFirst(t, i) => Some((RegexToken::Type(t), i.get() as usize, false)),
        Nesting::GetAll(t) => Some((RegexToken::Type(t), 1, false)),
        Nesting::GetUpto(r) => Some((r, 1, false)),
        Nesting::GetFrom(r) => Some((r, 1, true)),
        Nesting::ToCase(_) | Nesting::Replace(..) | Nesting::Trim => None,
    }
}

struct Builder {
    c: InputConstraints,
    expression: usize,
}

impl Builder {
    fn fail<T>(&self, reason: impl Into<String>) -> Result<T, Unsatisfiable> {
        Err(Unsatisfiable { expression: self.expression, reason: reason.into() })
    }

    fn substring(&mut self, f: &Substring) -> Result<Shape, Unsatisfiable> {
        match *f {
            Substring::SubStr(k1, k2) => {
                let (a, b) = (k1.get(), k2.get());
                let (lo, hi) = match (a > 0, b > 0) {
                    (true, true) if a <= b => (b as usize, None),
                    (false, false) if a <= b => (a.unsigned_abs() as usize, None),
                    (true, false) => ((a + b.abs() - 1) as usize, None),
                    (false, true) => (a.unsigned_abs().max(b as u64) as usize, Some((b + a.abs() - 1) as usize)),
                    _ => return self.fail("positions are inverted for every length"),
                };
                self.c.min_len = self.c.min_len.max(lo);
                if let Some(hi) = hi {
                    self.c.max_len = Some(self.c.max_len.map_or(hi, |m| m.min(hi)));
                }
                if self.c.max_len.is_some_and(|m| m < self.c.min_len) {
                    return self.fail("length bounds are contradictory");
                }
                Ok(Shape::Opaque)
            }
            Substring::GetSpan(r1, i1, y1, r2, i2, y2) => {
                self.c.require(r1, i1.get().unsigned_abs() as usize);
                self.c.require(r2, i2.get().unsigned_abs() as usize);
                let mut shape = Shape::Opaque;
                if r1 == r2 && (i1.get() > 0) == (i2.get() > 0) {
                    let (a, b) = (i1.get(), i2.get());
                    let ends = |y| (y == Boundary::End) as i64;
                    if a > b || (a == b && !(y1 == Boundary::Start && y2 == Boundary::End)) {
                        return self.fail("span is empty or inverted on every input");
                    }
                    let n = b - a + ends(y2) - ends(y1);
                    if n > 0 {
                        shape = Shape::Tokens { r: r1, n: n as usize, glued: false };
                    }
                }
                self.c.spans.push(SpanOrder { r1, i1, y1, r2, i2, y2 });
                Ok(shape)
            }
        }
    }

    fn nesting(&mut self, n: &Nesting) -> Shape {
        if let Some((r, k, tail)) = demand(n) {
            self.c.require(r, k);
            if tail {
                self.c.tails.insert(r);
            }
        }
        match *n {
            Nesting::GetToken(t, _) => Shape::Tokens { r: RegexToken::Type(t), n: 1, glued: false },
            Nesting::GetFirst(t, i) => Shape::Tokens { r: RegexToken::Type(t), n: i.get() as usize, glued: true },
            Nesting::GetAll(t) => Shape::Tokens { r: RegexToken::Type(t), n: 1, glued: true },
            Nesting::ToCase(c) => Shape::Cased(c),
            Nesting::Replace(a, b) => Shape::Replaced(a, b),
            Nesting::Trim => Shape::Trimmed,
            Nesting::GetUpto(_) | Nesting::GetFrom(_) => Shape::Opaque,
        }
    }

    /// Applies `outer` to a string of the given shape, pushing any demand
    /// back onto the original input where that is sound.
    fn compose(&mut self, outer: &Nesting, inner: Shape) -> Result<(), Unsatisfiable> {
        if matches!(outer, Nesting::ToCase(_) | Nesting::Replace(..)) {
            return Ok(());
        }
        if let Nesting::Trim = outer {
            let ok = match inner {
                Shape::Cased(_) | Shape::Trimmed => true,
                Shape::Replaced(_, b) => b.as_char() != ' ',
                Shape::Tokens { r, n, .. } => n > 0 && r != RegexToken::Delim(Delimiter::new(' ').unwrap()),
                Shape::Opaque => false,
            };
            return if ok { Ok(()) } else { self.fail("Trim may see only whitespace") };
        }
        let (r, k, tail) = demand(outer).expect("token-reading function");
        match inner {
            Shape::Cased(case) => {
                let r = match (r, case) {
                    (RegexToken::Delim(_), _) => r,
                    (RegexToken::Type(t), _) if case_blind(t) => r,
                    (RegexToken::Type(TokenType::AllCaps), Case::AllCaps)
                    | (RegexToken::Type(TokenType::Lower), Case::Lower) => RegexToken::Type(TokenType::Word),
                    _ => return self.fail("token type does not survive the case change"),
                };
                self.transfer(r, k, tail);
                Ok(())
            }
            Shape::Replaced(a, b) => match r {
                RegexToken::Delim(d) if d == a || d == b => self.fail("delimiter is rewritten by Replace"),
                _ => {
                    self.transfer(r, k, tail);
                    Ok(())
                }
            },
            Shape::Trimmed => match r {
                _ if tail => self.fail("trailing text may be trimmed away"),
                RegexToken::Delim(d) if d.as_char() == ' ' => self.fail("spaces may be trimmed away"),
                _ => {
                    self.transfer(r, k, false);
                    Ok(())
                }
            },
            Shape::Tokens { r: src, n, glued } => {
                if tail {
                    return self.fail("no text is guaranteed after the last match");
                }
                let have = match (src, r) {
                    (RegexToken::Delim(a), RegexToken::Delim(b)) if a == b => n,
                    (RegexToken::Type(s), RegexToken::Type(t)) if contains(s, t) => {
                        if single_char(t) || (s == t && !glued) {
                            n
                        } else {
                            1
                        }
                    }
                    _ => 0,
                };
                if have >= k {
                    Ok(())
                } else {
                    self.fail("inner result may hold too few matches")
                }
            }
            Shape::Opaque => self.fail("nothing is known about the inner result"),
        }
    }

    fn transfer(&mut self, r: RegexToken, k: usize, tail: bool) {
        self.c.require(r, k);
        if tail {
            self.c.tails.insert(r);
        }
    }
}

/// Derives constraints that an input must meet for `program` to run, or
/// reports that a composed expression cannot be guaranteed to run.
pub fn derive_constraints(program: &Program) -> Result<InputConstraints, Unsatisfiable> {
    let mut b = Builder { c: InputConstraints { min_len: 1, ..Default::default() }, expression: 0 };
    for (i, e) in program.expressions().iter().enumerate() {
        b.expression = i;
        match e {
            Expression::Substring(f) => {
                b.substring(f)?;
            }
            Expression::Nesting(n) => {
                b.nesting(n);
            }
            Expression::NestingOfNesting(outer, inner) => {
                let shape = b.nesting(inner);
                b.compose(outer, shape)?;
            }
            Expression::NestingOfSubstring(outer, f) => {
                let shape = b.substring(f)?;
                b.compose(outer, shape)?;
            }
            Expression::ConstStr(_) => {}
        }
    }
    Ok(b.c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_program, Delimiter};

    fn derive(src: &str) -> Result<InputConstraints, Unsatisfiable> {
        derive_constraints(&parse_program(src).unwrap())
    }

    #[test]
    fn substr_bounds() {
        let c = derive("SubStr(-3, 2)").unwrap();
        assert_eq!((c.min_len, c.max_len), (3, Some(4)));
        let c = derive("SubStr(2, -3)").unwrap();
        assert_eq!((c.min_len, c.max_len), (4, None));
        assert!(derive("SubStr(5, 2)").is_err());
        assert!(derive("SubStr(-1, -2)").is_err());
        assert!(derive("SubStr(-1, 1) | SubStr(3, 3)").is_err());
    }

    #[test]
    fn token_counts_take_the_maximum() {
        let c = derive("GetToken(Word, -3) | GetToken(Word, 2) | GetFrom(':')").unwrap();
        assert_eq!(c.counts[&RegexToken::Type(TokenType::Word)], 3);
        let colon = RegexToken::Delim(Delimiter::new(':').unwrap());
        assert_eq!(c.counts[&colon], 1);
        assert!(c.tails.contains(&colon));
        assert!(c.satisfied_by("a b c:d"));
        assert!(!c.satisfied_by("a b c:"));
        assert!(!c.satisfied_by("a:b"));
    }

    #[test]
    fn span_ordering() {
        assert!(derive("GetSpan(Word, 2, Start, Word, 1, End)").is_err());
        assert!(derive("GetSpan(Word, 1, End, Word, 1, End)").is_err());
        let c = derive("GetSpan(Word, 1, Start, Number, 1, End)").unwrap();
        assert!(c.satisfied_by("ab 12"));
        assert!(!c.satisfied_by("12 ab"));
    }

    #[test]
    fn whitespace_only_inputs_are_rejected() {
        let c = derive("ConstStr('x')").unwrap();
        assert!(!c.satisfied_by("   "));
        assert!(c.satisfied_by(" . "));
    }

    #[test]
    fn compositions() {
        assert!(derive("ToCase(Lower, SubStr(1, 2))").is_ok());
        assert!(derive("GetToken(Word, 1, SubStr(1, 2))").is_err());
        assert!(derive("GetToken(Alphanum, 1, GetToken(Word, 1))").is_ok());
        assert!(derive("GetToken(Word, 2, GetToken(Word, 1))").is_err());
        assert!(derive("GetToken(Word, 1, GetToken(Number, 1))").is_err());
        assert!(derive("GetToken(Digit, 3, GetFirst(Number, 3))").is_ok());
        assert!(derive("GetFrom(Word, GetToken(Word, 1))").is_err());
        assert!(derive("Trim(GetToken(Word, 1))").is_ok());
        assert!(derive("Trim(GetUpto(' '))").is_err());
        assert!(derive("GetToken(PropCase, 1, ToCase(Lower))").is_err());
        let c = derive("GetToken(Lower, 2, ToCase(Lower))").unwrap();
        assert_eq!(c.counts[&RegexToken::Type(TokenType::Word)], 2);
        assert!(derive("GetFirst(Word, 2, GetSpan(Word, 1, Start, Word, 2, End))").is_ok());
        assert!(derive("GetFirst(Word, 3, GetSpan(Word, 1, Start, Word, 2, End))").is_err());
        assert!(derive("GetUpto(',', Replace(',', ';'))").is_err());
    }
}
