//! Random input strings that meet a set of constraints.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::constraints::InputConstraints;
use super::GeneratorError;
use crate::dsl::{RegexToken, TokenType};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputConfig {
    pub min_len: usize,
    pub max_len: usize,
    /// Draws before giving up on a set of constraints.
    pub retries: usize,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig { min_len: 1, max_len: 36, retries: 50 }
    }
}

const UPPER: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ";
const LOWER: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
const DIGITS: &[u8] = b"0123456789";
const SEPARATORS: &[u8] = b" ,.;:-_/()@#&+";

fn pick(rng: &mut (impl Rng + ?Sized), set: &[u8]) -> char {
    *set.choose(rng).unwrap() as char
}

fn run(rng: &mut (impl Rng + ?Sized), set: &[u8], len: usize) -> String {
    (0..len).map(|_| pick(rng, set)).collect()
}

/// One match of `r`, at most `cap` characters long.
fn instance(rng: &mut (impl Rng + ?Sized), r: RegexToken, cap: usize) -> String {
    let mut len = |lo: usize, hi: usize| rng.random_range(lo..=hi.min(cap).max(lo));
    let t = match r {
        RegexToken::Delim(d) => return d.as_char().to_string(),
        RegexToken::Type(t) => t,
    };
    match t {
        TokenType::Number => {
            let n = len(1, 4);
            run(rng, DIGITS, n)
        }
        TokenType::Digit => run(rng, DIGITS, 1),
        TokenType::Word => {
            let n = len(1, 7);
            (0..n).map(|_| if rng.random_bool(0.3) { pick(rng, UPPER) } else { pick(rng, LOWER) }).collect()
        }
        TokenType::Alphanum => {
            let n = len(1, 6);
            (0..n)
                .map(|_| match rng.random_range(0..3) {
                    0 => pick(rng, UPPER),
                    1 => pick(rng, LOWER),
                    _ => pick(rng, DIGITS),
                })
                .collect()
        }
        TokenType::AllCaps => {
            let n = len(1, 5);
            run(rng, UPPER, n)
        }
        TokenType::PropCase => {
            let n = len(2, 7);
            let mut s = run(rng, UPPER, 1);
            s.push_str(&run(rng, LOWER, n - 1));
            s
        }
        TokenType::Lower => {
            let n = len(1, 6);
            run(rng, LOWER, n)
        }
        TokenType::Char => {
            let set = [UPPER, LOWER, DIGITS].concat();
            run(rng, &set, 1)
        }
    }
}

/// Free-form text that may contain anything printable.
fn filler(rng: &mut (impl Rng + ?Sized), len: usize) -> String {
    let kinds = [UPPER, LOWER, LOWER, DIGITS, SEPARATORS];
    let set = *kinds.choose(rng).unwrap();
    let mut s = run(rng, set, len);
    if rng.random_bool(0.2) && len > 1 {
        let i = rng.random_range(0..len);
        let c = rng.random_range(b' '..=b'~') as char;
        s.replace_range(i..i + 1, &c.to_string());
    }
    s
}

fn separator(rng: &mut (impl Rng + ?Sized)) -> char {
    if rng.random_bool(0.5) {
        ' '
    } else {
        pick(rng, SEPARATORS)
    }
}

fn draw(rng: &mut (impl Rng + ?Sized), c: &InputConstraints, lo: usize, hi: usize) -> Option<String> {
    let required: usize = c.counts.values().sum();
    let budget = hi.saturating_sub(required.saturating_sub(1));
    let cap = if required == 0 { hi } else { (budget / required).max(1) };
    let mut segments: Vec<String> = Vec::new();
    for (&r, &n) in &c.counts {
        for _ in 0..n {
            segments.push(instance(rng, r, cap));
        }
    }
    let base = segments.iter().map(String::len).sum::<usize>() + segments.len().saturating_sub(1);
    if base > hi {
        return None;
    }
    let target = rng.random_range(lo.max(base).max(1)..=hi);
    let mut length = base;
    while length < target {
        let room = target - length;
        if segments.is_empty() {
            let n = rng.random_range(1..=room);
            segments.push(filler(rng, n));
            length = segments[0].len();
        } else if room >= 2 && rng.random_bool(0.6) {
            let n = rng.random_range(1..=(room - 1).min(6));
            segments.push(filler(rng, n));
            length += n + 1;
        } else {
            segments.push(String::new());
            length += 1;
        }
    }
    segments.shuffle(rng);
    let mut out = String::with_capacity(target);
    for (i, s) in segments.iter().enumerate() {
        if i > 0 {
            out.push(separator(rng));
        }
        out.push_str(s);
    }
    Some(out)
}

/// Samples an input that satisfies `c`, with length in the configured range.
pub fn sample_input<R: Rng + ?Sized>(
    rng: &mut R,
    c: &InputConstraints,
    cfg: &InputConfig,
) -> Result<String, GeneratorError> {
    let lo = cfg.min_len.max(c.min_len).max(1);
    let hi = c.max_len.map_or(cfg.max_len, |m| m.min(cfg.max_len));
    let fail = |reason: &str| GeneratorError::GenerationFailure { attempts: cfg.retries, reason: reason.into() };
    if lo > hi {
        return Err(fail("length bounds leave no room"));
    }
    for _ in 0..cfg.retries {
        if let Some(v) = draw(rng, c, lo, hi) {
            if v.len() >= lo && c.satisfied_by(&v) {
                return Ok(v);
            }
        }
    }
    Err(fail("no draw satisfied the constraints"))
}
