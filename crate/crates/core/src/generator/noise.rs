//! Character-level noise on observed examples.

use rand::Rng;

use super::instance::Instance;
use crate::metrics::edit_distance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Input,
    Output,
}

/// A single-character edit at a byte position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edit {
    Insert(usize, char),
    Delete(usize),
    Substitute(usize, char),
}

pub fn apply_edit(s: &str, e: Edit) -> String {
    let mut out = s.to_string();
    match e {
        Edit::Insert(i, c) => out.insert(i, c),
        Edit::Delete(i) => {
            out.remove(i);
        }
        Edit::Substitute(i, c) => out.replace_range(i..i + 1, c.encode_utf8(&mut [0; 4])),
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NoiseSpec {
    /// Total edits spread over all observed examples.
    pub chars: usize,
}

fn printable(rng: &mut (impl Rng + ?Sized)) -> char {
    rng.random_range(b' '..=b'~') as char
}

fn random_edit(rng: &mut (impl Rng + ?Sized), s: &str) -> Edit {
    let len = s.len();
    let kind = rng.random_range(0..3);
    match kind {
        0 => Edit::Insert(rng.random_range(0..=len), printable(rng)),
        1 if len > 1 => Edit::Delete(rng.random_range(0..len)),
        _ if len == 0 => Edit::Insert(0, printable(rng)),
        _ => {
            let i = rng.random_range(0..len);
            let old = s.as_bytes()[i] as char;
            let c = loop {
                let c = printable(rng);
                if c != old {
                    break c;
                }
            };
            Edit::Substitute(i, c)
        }
    }
}

/// Applies `spec.chars` random edits to the observed examples. Each edit
/// picks an example, a side, a kind, and a position uniformly, and is kept
/// only if it moves the string one edit further from its clean form, so
/// the total distance to the clean examples is exactly `spec.chars`.
/// Deleting from a one-character string becomes a substitution.
pub fn inject_noise<R: Rng + ?Sized>(rng: &mut R, instance: &Instance, spec: NoiseSpec) -> Instance {
    let mut out = instance.clone();
    out.noise = instance.noise + spec.chars;
    if out.observed.is_empty() {
        return out;
    }
    for _ in 0..spec.chars {
        loop {
            let j = rng.random_range(0..out.observed.len());
            let side = if rng.random_bool(0.5) { Side::Input } else { Side::Output };
            let (clean, noisy) = match side {
                Side::Input => (&instance.observed[j].input, &mut out.observed[j].input),
                Side::Output => (&instance.observed[j].output, &mut out.observed[j].output),
            };
            let before = edit_distance(clean, noisy);
            let next = apply_edit(noisy, random_edit(rng, noisy));
            if edit_distance(clean, &next) == before + 1 {
                *noisy = next;
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{Example, SeededRng};
    use rand::SeedableRng;

    #[test]
    fn deleting_one_letter() {
        assert_eq!(apply_edit("Smith, John", Edit::Delete(8)), "Smith, Jhn");
    }

    #[test]
    fn total_distance_matches_noise_level() {
        let inst = Instance {
            observed: vec![
                Example::new("John Smith", "Smith, John"),
                Example::new("Doug Ross", "Ross, Doug"),
                Example::new("a", "b"),
            ],
            assessment: vec![],
            reference: None,
            noise: 0,
        };
        let mut rng = SeededRng::seed_from_u64(3);
        for n in 0..=8 {
            let noisy = inject_noise(&mut rng, &inst, NoiseSpec { chars: n });
            let total: usize = inst
                .observed
                .iter()
                .zip(&noisy.observed)
                .map(|(a, b)| edit_distance(&a.input, &b.input) + edit_distance(&a.output, &b.output))
                .sum();
            assert_eq!(total, n);
            assert_eq!(noisy.noise, n);
        }
    }
}
