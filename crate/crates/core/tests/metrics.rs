use std::collections::HashMap;

use pbe_core::generator::{generate_instance, Example, GeneratorConfig, Instance, SeededRng};
use pbe_core::metrics::{edit_distance, evaluate_corpus, noisy_copy, pooled_cer, System, SystemOutput};
use pbe_core::model::ModelError;
use proptest::prelude::*;
use rand::SeedableRng;

/// Plain recursive Levenshtein distance, memoized on suffix positions.
fn reference_distance(a: &[u8], b: &[u8]) -> usize {
    fn go(a: &[u8], b: &[u8], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&d) = memo.get(&(i, j)) {
            return d;
        }
        let d = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo).min(go(a, b, i, j + 1, memo)).min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), d);
        d
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

proptest! {
    #[test]
    fn edit_distance_matches_recursive_definition(a in "[a-c ]{0,8}", b in "[a-c ]{0,8}") {
        prop_assert_eq!(edit_distance(&a, &b), reference_distance(a.as_bytes(), b.as_bytes()));
    }

    #[test]
    fn edit_distance_is_a_metric(a in "[ -~]{0,12}", b in "[ -~]{0,12}", c in "[ -~]{0,12}") {
        let d = edit_distance;
        prop_assert_eq!(d(&a, &a), 0);
        prop_assert_eq!(d(&a, &b) == 0, a == b);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        prop_assert!(d(&a, &b) >= a.len().abs_diff(b.len()));
        prop_assert!(d(&a, &b) <= a.len().max(b.len()));
    }

    #[test]
    fn pooled_cer_is_zero_only_for_exact_matches(pairs in prop::collection::vec(("[a-d]{0,6}", "[a-d]{1,6}"), 1..5)) {
        let cer = pooled_cer(pairs.iter().map(|(p, r)| (Some(p.as_str()), r.as_str())));
        let exact = pairs.iter().all(|(p, r)| p == r);
        prop_assert_eq!(cer == 0.0, exact);
        prop_assert!(cer.is_finite() && cer >= 0.0);
    }

    #[test]
    fn a_failed_evaluation_makes_cer_infinite(r in "[a-d]{1,6}") {
        prop_assert!(pooled_cer([(None, r.as_str()), (Some(r.as_str()), r.as_str())]).is_infinite());
    }
}

fn toy_instances(seed: u64, n: usize) -> Vec<Instance> {
    let mut rng = SeededRng::seed_from_u64(seed);
    (0..n).map(|_| generate_instance(&mut rng, &GeneratorConfig::toy()).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noise_moves_observed_examples_exactly_level_edits(seed in any::<u64>(), level in 0usize..6) {
        let clean = toy_instances(seed, 3);
        let noisy = noisy_copy(&clean, level, seed);
        prop_assert_eq!(&noisy, &noisy_copy(&clean, level, seed));
        for (c, n) in clean.iter().zip(&noisy) {
            let moved: usize = c
                .observed
                .iter()
                .zip(&n.observed)
                .map(|(a, b)| edit_distance(&a.input, &b.input) + edit_distance(&a.output, &b.output))
                .sum();
            prop_assert_eq!(moved, level);
            prop_assert_eq!(&c.assessment, &n.assessment);
            prop_assert_eq!(n.noise, level);
        }
    }
}

/// Answers each instance's assessment inputs from a fixed table keyed by
/// the first observed input.
struct Table(HashMap<String, Vec<Option<String>>>);

impl System for Table {
    fn run(&self, observed: &[Example], _: &[String]) -> Result<SystemOutput, ModelError> {
        Ok(SystemOutput { predictions: self.0[&observed[0].input].clone(), program: None, consistent: None })
    }

    fn describe(&self) -> String {
        "table".into()
    }
}

proptest! {
    #[test]
    fn average_example_accuracy_bounds_all_example(
        hits in prop::collection::vec(prop::collection::vec(any::<bool>(), 6), 1..30)
    ) {
        let mut table = HashMap::new();
        let mut instances = Vec::new();
        for (k, row) in hits.iter().enumerate() {
            let key = format!("i{k}");
            let assessment: Vec<Example> = (0..6).map(|j| Example::new(format!("q{j}"), format!("a{j}"))).collect();
            let preds = row.iter().enumerate().map(|(j, &h)| Some(if h { format!("a{j}") } else { "miss".into() })).collect();
            table.insert(key.clone(), preds);
            instances.push(Instance { observed: vec![Example::new(key, "x")], assessment, reference: None, noise: 0 });
        }
        let row = evaluate_corpus(&Table(table), &instances, 0).unwrap();
        let all = hits.iter().filter(|r| r.iter().all(|&h| h)).count() as f64 / hits.len() as f64;
        let avg = hits.iter().flatten().filter(|&&h| h).count() as f64 / (6 * hits.len()) as f64;
        prop_assert!((row.all_example - all).abs() < 1e-12);
        prop_assert!((row.average_example - avg).abs() < 1e-12);
        prop_assert!(row.average_example >= row.all_example);
        prop_assert_eq!(row.consistency, None);
    }
}
