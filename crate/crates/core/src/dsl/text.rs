//! Human-readable program text: expressions joined by ` | `, nesting written
//! with the inner expression as the last argument, e.g.
//! `GetToken(Word, -1) | ConstStr(',') | ToCase(Proper, GetToken(Word, 1))`.

use std::fmt::{self, Write};

use super::ast::{
    Boundary, Case, ConstChar, Delimiter, Expression, Index, Nesting, Position, Program, RegexToken,
    Substring, TokenType,
};
use super::DslError;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn quote(c: char) -> String {
    match c {
        '\'' => "'\\''".into(),
        '\\' => "'\\\\'".into(),
        c => format!("'{c}'"),
    }
}

struct RegexText(RegexToken);

impl fmt::Display for RegexText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            RegexToken::Type(t) => f.write_str(t.name()),
            RegexToken::Delim(d) => f.write_str(&quote(d.as_char())),
        }
    }
}

fn nesting_args(n: &Nesting) -> String {
    match *n {
        Nesting::GetToken(t, i) => format!("{t}, {}", i.get()),
        Nesting::ToCase(c) => c.name().to_string(),
        Nesting::Replace(a, b) => format!("{}, {}", quote(a.as_char()), quote(b.as_char())),
        Nesting::Trim => String::new(),
        Nesting::GetUpto(r) | Nesting::GetFrom(r) => RegexText(r).to_string(),
        Nesting::GetFirst(t, i) => format!("{t}, {}", i.get()),
        Nesting::GetAll(t) => t.to_string(),
    }
}

fn write_substring(out: &mut String, f: &Substring) {
    match *f {
        Substring::SubStr(a, b) => {
            let _ = write!(out, "SubStr({}, {})", a.get(), b.get());
        }
        Substring::GetSpan(r1, i1, y1, r2, i2, y2) => {
            let _ = write!(
                out,
                "GetSpan({}, {}, {}, {}, {}, {})",
                RegexText(r1),
                i1.get(),
                y1.name(),
                RegexText(r2),
                i2.get(),
                y2.name()
            );
        }
    }
}

fn write_nesting(out: &mut String, n: &Nesting, inner: Option<&str>) {
    let args = nesting_args(n);
    out.push_str(n.function_name());
    out.push('(');
    out.push_str(&args);
    if let Some(inner) = inner {
        if !args.is_empty() {
            out.push_str(", ");
        }
        out.push_str(inner);
    }
    out.push(')');
}

pub fn format_expression(e: &Expression) -> String {
    let mut out = String::new();
    match e {
        Expression::Substring(f) => write_substring(&mut out, f),
        Expression::Nesting(n) => write_nesting(&mut out, n, None),
        Expression::NestingOfNesting(outer, inner) => {
            let mut s = String::new();
            write_nesting(&mut s, inner, None);
            write_nesting(&mut out, outer, Some(&s));
        }
        Expression::NestingOfSubstring(outer, f) => {
            let mut s = String::new();
            write_substring(&mut s, f);
            write_nesting(&mut out, outer, Some(&s));
        }
        Expression::ConstStr(c) => {
            let _ = write!(out, "ConstStr({})", quote(c.as_char()));
        }
    }
    out
}

pub fn format_program(p: &Program) -> String {
    p.expressions().iter().map(format_expression).collect::<Vec<_>>().join(" | ")
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_program(self))
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Char(char),
    LParen,
    RParen,
    Comma,
    Pipe,
}

#[derive(Clone, Copy, Debug)]
struct Loc {
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<(Tok, Loc)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    let err = |line, column, message: String| ParseError { line, column, message };
    while i < chars.len() {
        let c = chars[i];
        let loc = Loc { line, column: col };
        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
                continue;
            }
            '(' | ')' | ',' | '|' => {
                let t = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    _ => Tok::Pipe,
                };
                out.push((t, loc));
                i += 1;
                col += 1;
            }
            '\'' => {
                let (value, used) = match (chars.get(i + 1), chars.get(i + 2), chars.get(i + 3)) {
                    (Some('\\'), Some(&e), Some('\'')) if e == '\'' || e == '\\' => (e, 4),
                    (Some(&v), Some('\''), _) if v != '\\' => (v, 3),
                    _ => return Err(err(line, col, "malformed character literal".into())),
                };
                out.push((Tok::Char(value), loc));
                i += used;
                col += used;
            }
            c if c == '-' || c.is_ascii_digit() => {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let v = text
                    .parse::<i64>()
                    .map_err(|_| err(line, col, format!("invalid integer {text:?}")))?;
                out.push((Tok::Int(v), loc));
                col += i - start;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), loc));
                col += i - start;
            }
            other => return Err(err(line, col, format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

#[derive(Debug)]
enum Arg {
    Int(i64),
    Ident(String),
    Char(char),
    Call(Call),
}

#[derive(Debug)]
struct Call {
    name: String,
    args: Vec<(Arg, Loc)>,
    loc: Loc,
}

struct Parser {
    toks: Vec<(Tok, Loc)>,
    pos: usize,
    end: Loc,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn loc(&self) -> Loc {
        self.toks.get(self.pos).map(|(_, l)| *l).unwrap_or(self.end)
    }

    fn error(&self, loc: Loc, message: impl Into<String>) -> ParseError {
        ParseError { line: loc.line, column: loc.column, message: message.into() }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(self.loc(), format!("expected {what}")))
        }
    }

    fn call(&mut self) -> Result<Call, ParseError> {
        let loc = self.loc();
        let name = match self.peek() {
            Some(Tok::Ident(n)) => n.clone(),
            _ => return Err(self.error(loc, "expected a function name")),
        };
        self.pos += 1;
        self.expect(Tok::LParen, "'('")?;
        let mut args = Vec::new();
        if self.peek() != Some(&Tok::RParen) {
            loop {
                let aloc = self.loc();
                let arg = match self.peek().cloned() {
                    Some(Tok::Int(v)) => {
                        self.pos += 1;
                        Arg::Int(v)
                    }
                    Some(Tok::Char(c)) => {
                        self.pos += 1;
                        Arg::Char(c)
                    }
                    Some(Tok::Ident(id)) => {
                        if matches!(self.toks.get(self.pos + 1), Some((Tok::LParen, _))) {
                            Arg::Call(self.call()?)
                        } else {
                            self.pos += 1;
                            Arg::Ident(id)
                        }
                    }
                    _ => return Err(self.error(aloc, "expected an argument")),
                };
                args.push((arg, aloc));
                if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "')'")?;
        Ok(Call { name, args, loc })
    }
}

fn domain_at(loc: Loc, e: DslError) -> ParseError {
    ParseError { line: loc.line, column: loc.column, message: e.to_string() }
}

fn bad(loc: Loc, message: impl Into<String>) -> ParseError {
    ParseError { line: loc.line, column: loc.column, message: message.into() }
}

fn int_arg(a: &(Arg, Loc)) -> Result<i64, ParseError> {
    match &a.0 {
        Arg::Int(v) => Ok(*v),
        _ => Err(bad(a.1, "expected an integer")),
    }
}

fn position_arg(a: &(Arg, Loc)) -> Result<Position, ParseError> {
    Position::new(int_arg(a)?).map_err(|e| domain_at(a.1, e))
}

fn index_arg(a: &(Arg, Loc)) -> Result<Index, ParseError> {
    Index::new(int_arg(a)?).map_err(|e| domain_at(a.1, e))
}

fn type_arg(a: &(Arg, Loc)) -> Result<TokenType, ParseError> {
    match &a.0 {
        Arg::Ident(n) => {
            TokenType::from_name(n).ok_or_else(|| bad(a.1, format!("unknown token type {n:?}")))
        }
        _ => Err(bad(a.1, "expected a token type")),
    }
}

fn delim_arg(a: &(Arg, Loc)) -> Result<Delimiter, ParseError> {
    match &a.0 {
        Arg::Char(c) => Delimiter::new(*c).map_err(|e| domain_at(a.1, e)),
        _ => Err(bad(a.1, "expected a quoted delimiter")),
    }
}

fn regex_arg(a: &(Arg, Loc)) -> Result<RegexToken, ParseError> {
    match &a.0 {
        Arg::Char(_) => delim_arg(a).map(RegexToken::Delim),
        _ => type_arg(a).map(RegexToken::Type),
    }
}

fn boundary_arg(a: &(Arg, Loc)) -> Result<Boundary, ParseError> {
    match &a.0 {
        Arg::Ident(n) => Boundary::from_name(n).ok_or_else(|| bad(a.1, format!("unknown boundary {n:?}"))),
        _ => Err(bad(a.1, "expected Start or End")),
    }
}

fn arity(call: &Call, n: usize) -> Result<(), ParseError> {
    if call.args.len() == n {
        Ok(())
    } else {
        Err(bad(call.loc, format!("{} takes {n} arguments, got {}", call.name, call.args.len())))
    }
}

fn to_substring(call: &Call) -> Result<Option<Substring>, ParseError> {
    let a = &call.args;
    match call.name.as_str() {
        "SubStr" => {
            arity(call, 2)?;
            Ok(Some(Substring::SubStr(position_arg(&a[0])?, position_arg(&a[1])?)))
        }
        "GetSpan" => {
            arity(call, 6)?;
            Ok(Some(Substring::GetSpan(
                regex_arg(&a[0])?,
                index_arg(&a[1])?,
                boundary_arg(&a[2])?,
                regex_arg(&a[3])?,
                index_arg(&a[4])?,
                boundary_arg(&a[5])?,
            )))
        }
        _ => Ok(None),
    }
}

/// Parses a nesting call, returning the function and its optional inner call.
fn to_nesting(call: &Call) -> Result<Option<(Nesting, Option<&Call>)>, ParseError> {
    let params = match call.name.as_str() {
        "GetToken" | "GetFirst" | "Replace" => 2,
        "ToCase" | "GetUpto" | "GetFrom" | "GetAll" => 1,
        "Trim" => 0,
        _ => return Ok(None),
    };
    let (inner, a) = match call.args.split_last() {
        Some(((Arg::Call(c), _), rest)) => (Some(c), rest),
        _ => (None, call.args.as_slice()),
    };
    if a.len() != params {
        return Err(bad(call.loc, format!("{} takes {params} parameters, got {}", call.name, a.len())));
    }
    let n = match call.name.as_str() {
        "GetToken" => Nesting::GetToken(type_arg(&a[0])?, index_arg(&a[1])?),
        "GetFirst" => Nesting::GetFirst(type_arg(&a[0])?, index_arg(&a[1])?),
        "Replace" => Nesting::Replace(delim_arg(&a[0])?, delim_arg(&a[1])?),
        "ToCase" => match &a[0].0 {
            Arg::Ident(n) => Nesting::ToCase(
                Case::from_name(n).ok_or_else(|| bad(a[0].1, format!("unknown case {n:?}")))?,
            ),
            _ => return Err(bad(a[0].1, "expected a case")),
        },
        "GetUpto" => Nesting::GetUpto(regex_arg(&a[0])?),
        "GetFrom" => Nesting::GetFrom(regex_arg(&a[0])?),
        "GetAll" => Nesting::GetAll(type_arg(&a[0])?),
        _ => Nesting::Trim,
    };
    n.validate().map_err(|e| domain_at(call.loc, e))?;
    Ok(Some((n, inner)))
}

fn to_expression(call: &Call) -> Result<Expression, ParseError> {
    if call.name == "ConstStr" || call.name == "Const" {
        arity(call, 1)?;
        return match &call.args[0].0 {
            Arg::Char(c) => {
                Ok(Expression::ConstStr(ConstChar::new(*c).map_err(|e| domain_at(call.args[0].1, e))?))
            }
            _ => Err(bad(call.args[0].1, "expected a quoted character")),
        };
    }
    if let Some(f) = to_substring(call)? {
        return Ok(Expression::Substring(f));
    }
    let Some((outer, inner)) = to_nesting(call)? else {
        return Err(bad(call.loc, format!("unknown function {:?}", call.name)));
    };
    let Some(inner) = inner else {
        return Ok(Expression::Nesting(outer));
    };
    if let Some(f) = to_substring(inner)? {
        return Ok(Expression::NestingOfSubstring(outer, f));
    }
    match to_nesting(inner)? {
        Some((n, None)) => Ok(Expression::NestingOfNesting(outer, n)),
        Some((_, Some(deeper))) => Err(bad(deeper.loc, "nesting deeper than two levels")),
        None => Err(bad(inner.loc, format!("{} cannot be nested", inner.name))),
    }
}

/// Parses the pipe-separated program text produced by [`format_program`].
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let toks = lex(src)?;
    let end = {
        let lines: Vec<&str> = src.split('\n').collect();
        Loc { line: lines.len(), column: lines.last().map_or(0, |l| l.chars().count()) + 1 }
    };
    let mut p = Parser { toks, pos: 0, end };
    let mut exprs = Vec::new();
    loop {
        let call = p.call()?;
        exprs.push(to_expression(&call)?);
        match p.peek() {
            Some(Tok::Pipe) => p.pos += 1,
            None => break,
            Some(_) => return Err(p.error(p.loc(), "expected '|' or end of program")),
        }
    }
    Program::new(exprs).map_err(|e| ParseError { line: 1, column: 1, message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_the_name_swap_program() {
        let p = parse_program(
            "GetToken(Alpha, -1) | ConstStr(',') | ConstStr(' ') | ToCase(Proper, GetToken(Alpha, 1))",
        )
        .unwrap();
        assert_eq!(
            format_program(&p),
            "GetToken(Word, -1) | ConstStr(',') | ConstStr(' ') | ToCase(Proper, GetToken(Word, 1))"
        );
    }

    #[test]
    fn trim_without_arguments() {
        let p = parse_program("Trim()").unwrap();
        assert_eq!(p.expressions(), &[Expression::Nesting(Nesting::Trim)]);
    }

    #[test]
    fn index_domain_is_checked() {
        let err = parse_program("GetSpan(Number, 6, Start, Number, 1, End)").unwrap_err();
        assert_eq!((err.line, err.column), (1, 17));
    }

    #[test]
    fn quotes_are_escaped() {
        let p = parse_program(r"ConstStr('\'') | ConstStr('\\') | Replace('\'', ' ')").unwrap();
        assert_eq!(parse_program(&format_program(&p)).unwrap(), p);
    }

    #[test]
    fn reports_line_and_column() {
        let err = parse_program("SubStr(1, 3) |\n  Bogus(1)").unwrap_err();
        assert_eq!((err.line, err.column), (2, 3));
    }

    #[test]
    fn rejects_three_levels() {
        assert!(parse_program("ToCase(Lower, Trim(SubStr(1, 2)))").is_err());
    }

    #[test]
    fn trim_of_substring() {
        let p = parse_program("Trim(SubStr(1, 3))").unwrap();
        assert_eq!(format_program(&p), "Trim(SubStr(1, 3))");
    }
}
