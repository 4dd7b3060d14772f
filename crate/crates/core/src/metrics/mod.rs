//! Edit distance, consistency, and generalization metrics, plus corpus
//! evaluation and noise sweeps.

mod report;

pub use report::{
    evaluate_corpus, noise_sweep, noisy_copy, Inducer, InstanceOutcome, MetricsReport, ReportConfig, ReportRow, Synthesizer,
    System, SystemOutput,
};

use crate::dsl::{eval_program, Program};
use crate::generator::Example;

/// Levenshtein distance over bytes with unit costs.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Character edit rate of `predicted` against `reference`, pooled over
/// pairs: total edit distance over total reference length.
///
/// `None` entries (failed evaluations) give an infinite rate.
pub fn pooled_cer<'a>(pairs: impl IntoIterator<Item = (Option<&'a str>, &'a str)>) -> f64 {
    let (mut dist, mut len) = (0usize, 0usize);
    for (p, r) in pairs {
        let Some(p) = p else { return f64::INFINITY };
        dist += edit_distance(p, r);
        len += r.len();
    }
    if len == 0 {
        if dist == 0 { 0.0 } else { f64::INFINITY }
    } else {
        dist as f64 / len as f64
    }
}

/// Whether `p` reproduces every observed output exactly.
pub fn consistent(p: &Program, observed: &[Example]) -> bool {
    observed.iter().all(|e| eval_program(p, &e.input).is_ok_and(|o| o == e.output))
}

/// Number of predictions equal to their reference output.
pub fn correct_count(predicted: &[Option<String>], assessment: &[Example]) -> usize {
    assert_eq!(predicted.len(), assessment.len(), "one prediction per assessment example");
    predicted.iter().zip(assessment).filter(|(p, e)| p.as_deref() == Some(e.output.as_str())).count()
}

/// Whether every prediction equals its reference output.
pub fn generalizes(predicted: &[Option<String>], assessment: &[Example]) -> bool {
    correct_count(predicted, assessment) == assessment.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;

    #[test]
    fn edit_distance_cases() {
        assert_eq!(edit_distance("abc", "abc"), 0);
        assert_eq!(edit_distance("Smith, John", "Smith, Jhn"), 1);
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(edit_distance("kitten", "sitting"), 3);
    }

    #[test]
    fn consistency_cases() {
        let p = parse_program("GetToken(Word, -1) | ConstStr(',') | ConstStr(' ') | GetToken(Word, 1)").unwrap();
        let clean = [Example::new("John Smith", "Smith, John")];
        let noisy = [Example::new("John Smith", "Smith, Jhn")];
        assert!(consistent(&p, &clean));
        assert!(!consistent(&p, &noisy));
        assert!(consistent(&p, &[]));
    }

    #[test]
    fn pooled_cer_sums_before_dividing() {
        let c = pooled_cer([(Some("ab"), "abcd"), (Some("x"), "y")]);
        assert!((c - 3.0 / 5.0).abs() < 1e-12);
        assert!(pooled_cer([(None, "a"), (Some("a"), "a")]).is_infinite());
    }

    #[test]
    fn generalization_requires_all() {
        let a: Vec<Example> = (0..6).map(|i| Example::new(format!("{i}"), format!("{i}"))).collect();
        let mut p: Vec<Option<String>> = a.iter().map(|e| Some(e.output.clone())).collect();
        assert!(generalizes(&p, &a));
        p[3] = None;
        assert!(!generalizes(&p, &a));
        assert_eq!(correct_count(&p, &a), 5);
    }
}
