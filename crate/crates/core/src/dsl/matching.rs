//! Fixed character-class matchers behind the regex tokens.

use super::ast::{RegexToken, TokenType};

/// A match as a half-open range of gap positions: `start` is the gap before
/// the first matched character, `end` the gap after the last one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Match {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Returns all non-overlapping, maximal matches of `token` in `v`, left to
/// right.
///
/// Classes: `Number = [0-9]+`, `Digit = [0-9]`, `Word = [A-Za-z]+`,
/// `Alphanum = [A-Za-z0-9]+`, `AllCaps = [A-Z]+`, `PropCase = [A-Z][a-z]+`,
/// `Lower = [a-z]+`, `Char = [A-Za-z0-9]`. A delimiter matches each literal
/// occurrence of its character.
pub fn match_token(token: RegexToken, v: &str) -> Vec<Match> {
    let bytes = v.as_bytes();
    let spans = match token {
        RegexToken::Delim(d) => bytes
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == d.as_byte())
            .map(|(i, _)| (i, i + 1))
            .collect(),
        RegexToken::Type(TokenType::Number) => runs(bytes, |b| b.is_ascii_digit()),
        RegexToken::Type(TokenType::Word) => runs(bytes, |b| b.is_ascii_alphabetic()),
        RegexToken::Type(TokenType::Alphanum) => runs(bytes, |b| b.is_ascii_alphanumeric()),
        RegexToken::Type(TokenType::AllCaps) => runs(bytes, |b| b.is_ascii_uppercase()),
        RegexToken::Type(TokenType::Lower) => runs(bytes, |b| b.is_ascii_lowercase()),
        RegexToken::Type(TokenType::Digit) => singles(bytes, |b| b.is_ascii_digit()),
        RegexToken::Type(TokenType::Char) => singles(bytes, |b| b.is_ascii_alphanumeric()),
        RegexToken::Type(TokenType::PropCase) => proper_case(bytes),
    };
    spans
        .into_iter()
        .map(|(start, end)| Match { start, end, text: v[start..end].to_string() })
        .collect()
}

/// Number of matches, without materializing the texts.
pub fn count_matches(token: RegexToken, v: &str) -> usize {
    match_token(token, v).len()
}

fn runs(bytes: &[u8], class: impl Fn(u8) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if class(bytes[i]) {
            let start = i;
            while i < bytes.len() && class(bytes[i]) {
                i += 1;
            }
            out.push((start, i));
        } else {
            i += 1;
        }
    }
    out
}

fn singles(bytes: &[u8], class: impl Fn(u8) -> bool) -> Vec<(usize, usize)> {
    bytes
        .iter()
        .enumerate()
        .filter(|(_, &b)| class(b))
        .map(|(i, _)| (i, i + 1))
        .collect()
}

fn proper_case(bytes: &[u8]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < bytes.len() {
        if bytes[i].is_ascii_uppercase() && bytes[i + 1].is_ascii_lowercase() {
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_lowercase() {
                i += 1;
            }
            out.push((start, i));
        } else {
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::ast::Delimiter;

    fn texts(t: RegexToken, v: &str) -> Vec<String> {
        match_token(t, v).into_iter().map(|m| m.text).collect()
    }

    #[test]
    fn alphanum_splits_on_punctuation() {
        assert_eq!(
            texts(RegexToken::Type(TokenType::Alphanum), "Ud 9:25,JV3 Obb"),
            ["Ud", "9", "25", "JV3", "Obb"]
        );
    }

    #[test]
    fn all_caps_runs() {
        assert_eq!(
            texts(RegexToken::Type(TokenType::AllCaps), "JUGRB.MPKA.MTHV,tEczT-GZJ.MFT"),
            ["JUGRB", "MPKA", "MTHV", "E", "T", "GZJ", "MFT"]
        );
    }

    #[test]
    fn empty_input_has_no_matches() {
        for t in TokenType::ALL {
            assert!(match_token(RegexToken::Type(t), "").is_empty());
        }
    }

    #[test]
    fn char_and_digit_are_single_characters() {
        assert_eq!(texts(RegexToken::Type(TokenType::Char), "a.B1"), ["a", "B", "1"]);
        assert_eq!(texts(RegexToken::Type(TokenType::Digit), "x12"), ["1", "2"]);
    }

    #[test]
    fn prop_case_needs_a_lowercase_tail() {
        assert_eq!(texts(RegexToken::Type(TokenType::PropCase), "ABcd Ef G hI"), ["Bcd", "Ef"]);
    }

    #[test]
    fn delimiter_matches_each_occurrence() {
        let colon = RegexToken::Delim(Delimiter::new(':').unwrap());
        let m = match_token(colon, "a::b");
        assert_eq!(m.len(), 2);
        assert_eq!((m[1].start, m[1].end), (2, 3));
    }
}
