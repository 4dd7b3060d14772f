//! Abstract syntax of the string transformation language.
//!
//! A [`Program`] concatenates the outputs of up to [`MAX_PROGRAM_LENGTH`]
//! expressions. Every parameter type is a newtype or enum whose constructor
//! enforces the grammar's domain, so a value of these types is always
//! well-formed.

use std::fmt;

use super::DslError;

/// Default (and largest) number of expressions in a program.
pub const MAX_PROGRAM_LENGTH: usize = 10;
/// Largest absolute value of a `SubStr` position.
pub const MAX_POSITION: i8 = 100;
/// Largest absolute value of a match index.
pub const MAX_INDEX: i8 = 5;

/// Character classes matched by the regex tokens.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenType {
    Number,
    Word,
    Alphanum,
    AllCaps,
    PropCase,
    Lower,
    Digit,
    Char,
}

impl TokenType {
    pub const ALL: [TokenType; 8] = [
        TokenType::Number,
        TokenType::Word,
        TokenType::Alphanum,
        TokenType::AllCaps,
        TokenType::PropCase,
        TokenType::Lower,
        TokenType::Digit,
        TokenType::Char,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TokenType::Number => "Number",
            TokenType::Word => "Word",
            TokenType::Alphanum => "Alphanum",
            TokenType::AllCaps => "AllCaps",
            TokenType::PropCase => "PropCase",
            TokenType::Lower => "Lower",
            TokenType::Digit => "Digit",
            TokenType::Char => "Char",
        }
    }

    /// Accepts the canonical names plus `Alpha` (for `Word`) and `Proper`
    /// (for `PropCase`), both of which appear in published program listings.
    pub fn from_name(name: &str) -> Option<TokenType> {
        let t = match name {
            "Number" => TokenType::Number,
            "Word" | "Alpha" => TokenType::Word,
            "Alphanum" => TokenType::Alphanum,
            "AllCaps" => TokenType::AllCaps,
            "PropCase" | "Proper" => TokenType::PropCase,
            "Lower" => TokenType::Lower,
            "Digit" => TokenType::Digit,
            "Char" => TokenType::Char,
            _ => return None,
        };
        Some(t)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TokenType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One of the 21 single-character delimiters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Delimiter(u8);

impl Delimiter {
    /// The delimiter characters, in vocabulary order. The trailing space is
    /// part of the set.
    pub const CHARS: [u8; 21] = [
        b'&', b',', b'.', b'?', b'!', b'@', b'(', b')', b'[', b']', b'%', b'{', b'}', b'/', b':',
        b';', b'$', b'#', b'"', b'\'', b' ',
    ];

    pub fn new(c: char) -> Result<Delimiter, DslError> {
        if c.is_ascii() && Self::CHARS.contains(&(c as u8)) {
            Ok(Delimiter(c as u8))
        } else {
            Err(DslError::Domain(format!("{c:?} is not a delimiter")))
        }
    }

    pub fn all() -> impl Iterator<Item = Delimiter> {
        Self::CHARS.iter().map(|&b| Delimiter(b))
    }

    pub fn as_char(self) -> char {
        self.0 as char
    }

    pub fn as_byte(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        Self::CHARS.iter().position(|&b| b == self.0).expect("constructed from CHARS")
    }

    /// Identifier-friendly name used in vocabulary dumps.
    pub fn name(self) -> &'static str {
        match self.0 {
            b'&' => "Ampersand",
            b',' => "Comma",
            b'.' => "Dot",
            b'?' => "Question",
            b'!' => "Bang",
            b'@' => "At",
            b'(' => "LeftParen",
            b')' => "RightParen",
            b'[' => "LeftBracket",
            b']' => "RightBracket",
            b'%' => "Percent",
            b'{' => "LeftBrace",
            b'}' => "RightBrace",
            b'/' => "Slash",
            b':' => "Colon",
            b';' => "Semicolon",
            b'$' => "Dollar",
            b'#' => "Hash",
            b'"' => "DoubleQuote",
            b'\'' => "SingleQuote",
            b' ' => "Space",
            _ => unreachable!("delimiter set is closed"),
        }
    }
}

/// A regex operand: either a character class or a literal delimiter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegexToken {
    Type(TokenType),
    Delim(Delimiter),
}

impl RegexToken {
    pub const COUNT: usize = 8 + 21;

    pub fn all() -> impl Iterator<Item = RegexToken> {
        TokenType::ALL
            .into_iter()
            .map(RegexToken::Type)
            .chain(Delimiter::all().map(RegexToken::Delim))
    }

    pub fn index(self) -> usize {
        match self {
            RegexToken::Type(t) => t.index(),
            RegexToken::Delim(d) => 8 + d.index(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegexToken::Type(t) => t.name(),
            RegexToken::Delim(d) => d.name(),
        }
    }
}

/// Target case for `ToCase`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Case {
    Proper,
    AllCaps,
    Lower,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::Proper, Case::AllCaps, Case::Lower];

    pub fn name(self) -> &'static str {
        match self {
            Case::Proper => "Proper",
            Case::AllCaps => "AllCaps",
            Case::Lower => "Lower",
        }
    }

    pub fn from_name(name: &str) -> Option<Case> {
        Case::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// Which side of a match a `GetSpan` boundary refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Boundary {
    Start,
    End,
}

impl Boundary {
    pub const ALL: [Boundary; 2] = [Boundary::Start, Boundary::End];

    pub fn name(self) -> &'static str {
        match self {
            Boundary::Start => "Start",
            Boundary::End => "End",
        }
    }

    pub fn from_name(name: &str) -> Option<Boundary> {
        Boundary::ALL.into_iter().find(|b| b.name() == name)
    }
}

/// A `SubStr` position in `[-100, -1] ∪ [1, 100]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position(i8);

impl Position {
    pub fn new(k: i64) -> Result<Position, DslError> {
        if k != 0 && k.abs() <= MAX_POSITION as i64 {
            Ok(Position(k as i8))
        } else {
            Err(DslError::Domain(format!("position {k} outside [-100,-1] ∪ [1,100]")))
        }
    }

    pub fn get(self) -> i64 {
        self.0 as i64
    }

    /// All 200 positions in ascending order.
    pub fn all() -> impl Iterator<Item = Position> {
        (-(MAX_POSITION as i64)..=MAX_POSITION as i64)
            .filter(|&k| k != 0)
            .map(|k| Position(k as i8))
    }
}

/// A match index in `[-5, -1] ∪ [1, 5]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Index(i8);

impl Index {
    pub fn new(i: i64) -> Result<Index, DslError> {
        if i != 0 && i.abs() <= MAX_INDEX as i64 {
            Ok(Index(i as i8))
        } else {
            Err(DslError::Domain(format!("index {i} outside [-5,-1] ∪ [1,5]")))
        }
    }

    pub fn get(self) -> i64 {
        self.0 as i64
    }

    pub fn all() -> impl Iterator<Item = Index> {
        (-(MAX_INDEX as i64)..=MAX_INDEX as i64)
            .filter(|&i| i != 0)
            .map(|i| Index(i as i8))
    }

    pub fn positive() -> impl Iterator<Item = Index> {
        (1..=MAX_INDEX).map(Index)
    }
}

/// A printable ASCII character used by `ConstStr`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstChar(u8);

impl ConstChar {
    pub fn new(c: char) -> Result<ConstChar, DslError> {
        if is_printable(c) {
            Ok(ConstChar(c as u8))
        } else {
            Err(DslError::Domain(format!("{c:?} is not printable ASCII")))
        }
    }

    pub fn as_char(self) -> char {
        self.0 as char
    }

    pub fn all() -> impl Iterator<Item = ConstChar> {
        (b' '..=b'~').map(ConstChar)
    }
}

/// True for the 95 printable ASCII characters (space through tilde).
pub fn is_printable(c: char) -> bool {
    (' '..='~').contains(&c)
}

/// Substring extraction from the current string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Substring {
    SubStr(Position, Position),
    GetSpan(RegexToken, Index, Boundary, RegexToken, Index, Boundary),
}

/// Functions that may be applied to the input or to the result of another
/// expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Nesting {
    GetToken(TokenType, Index),
    ToCase(Case),
    Replace(Delimiter, Delimiter),
    Trim,
    GetUpto(RegexToken),
    GetFrom(RegexToken),
    /// Concatenation of the first `i` matches; the index is always positive.
    GetFirst(TokenType, Index),
    GetAll(TokenType),
}

impl Nesting {
    /// Checks the constraints the parameter newtypes cannot express on their own.
    pub fn validate(&self) -> Result<(), DslError> {
        match *self {
            Nesting::GetFirst(_, i) if i.get() < 0 => {
                Err(DslError::Domain(format!("GetFirst index must be positive, got {}", i.get())))
            }
            Nesting::Replace(a, b) if a == b => Err(DslError::Domain(format!(
                "Replace needs two distinct delimiters, got {:?} twice",
                a.as_char()
            ))),
            _ => Ok(()),
        }
    }

    pub fn function_name(&self) -> &'static str {
        match self {
            Nesting::GetToken(..) => "GetToken",
            Nesting::ToCase(_) => "ToCase",
            Nesting::Replace(..) => "Replace",
            Nesting::Trim => "Trim",
            Nesting::GetUpto(_) => "GetUpto",
            Nesting::GetFrom(_) => "GetFrom",
            Nesting::GetFirst(..) => "GetFirst",
            Nesting::GetAll(_) => "GetAll",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Expression {
    Substring(Substring),
    Nesting(Nesting),
    /// `outer(inner)`: the inner function runs first.
    NestingOfNesting(Nesting, Nesting),
    /// `outer(f)`: the substring runs first.
    NestingOfSubstring(Nesting, Substring),
    ConstStr(ConstChar),
}

impl Expression {
    pub fn validate(&self) -> Result<(), DslError> {
        match self {
            Expression::Nesting(n) => n.validate(),
            Expression::NestingOfNesting(a, b) => {
                a.validate()?;
                b.validate()
            }
            Expression::NestingOfSubstring(n, _) => n.validate(),
            Expression::Substring(_) | Expression::ConstStr(_) => Ok(()),
        }
    }
}

/// A concatenation of one to ten expressions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Program {
    expressions: Vec<Expression>,
}

impl Program {
    pub fn new(expressions: Vec<Expression>) -> Result<Program, DslError> {
        if expressions.is_empty() {
            return Err(DslError::Domain("a program needs at least one expression".into()));
        }
        if expressions.len() > MAX_PROGRAM_LENGTH {
            return Err(DslError::Domain(format!(
                "a program holds at most {MAX_PROGRAM_LENGTH} expressions, got {}",
                expressions.len()
            )));
        }
        for e in &expressions {
            e.validate()?;
        }
        Ok(Program { expressions })
    }

    pub fn expressions(&self) -> &[Expression] {
        &self.expressions
    }

    pub fn len(&self) -> usize {
        self.expressions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expressions.is_empty()
    }
}
