use pbe_core::dsl::{eval_program, match_token, parse_program, RegexToken, TokenType};
use pbe_core::generator::{
    derive_constraints, generate_instance, inject_noise, read_dataset, sample_input, sample_program, write_dataset,
    Domain, GeneratorConfig, InputConfig, InputConstraints, NoiseSpec, SeededRng,
};
use pbe_core::metrics::edit_distance;
use proptest::prelude::*;
use rand::SeedableRng;

#[test]
fn four_numbers_are_always_present() {
    let c = derive_constraints(&parse_program("GetToken(Number, 4)").unwrap()).unwrap();
    assert_eq!(c.counts.get(&RegexToken::Type(TokenType::Number)), Some(&4));
    let mut rng = SeededRng::seed_from_u64(0);
    for _ in 0..1000 {
        let v = sample_input(&mut rng, &c, &InputConfig::default()).unwrap();
        assert!(match_token(RegexToken::Type(TokenType::Number), &v).len() >= 4, "{v:?}");
        assert!(v.bytes().all(|b| (b' '..=b'~').contains(&b)));
    }
}

#[test]
fn trim_needs_only_the_defaults() {
    let c = derive_constraints(&parse_program("Trim()").unwrap()).unwrap();
    assert_eq!(c, InputConstraints { min_len: 1, ..Default::default() });
}

#[test]
fn span_over_colons() {
    let p = parse_program("GetSpan(':', 2, Start, ':', 4, End)").unwrap();
    let c = derive_constraints(&p).unwrap();
    let colon = RegexToken::Delim(pbe_core::dsl::Delimiter::new(':').unwrap());
    assert_eq!(c.counts[&colon], 4);
    let mut rng = SeededRng::seed_from_u64(1);
    for _ in 0..200 {
        let v = sample_input(&mut rng, &c, &InputConfig::default()).unwrap();
        eval_program(&p, &v).unwrap();
    }
}

#[test]
fn input_sampling_is_seeded() {
    let c = InputConstraints { min_len: 1, ..Default::default() };
    let cfg = InputConfig::default();
    let a = sample_input(&mut SeededRng::seed_from_u64(8), &c, &cfg).unwrap();
    let b = sample_input(&mut SeededRng::seed_from_u64(8), &c, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(!a.is_empty());
}

#[test]
fn constraint_sufficiency_over_sampled_programs() {
    let mut rng = SeededRng::seed_from_u64(2);
    let d = Domain::full();
    let mut checked = 0;
    while checked < 1000 {
        let p = sample_program(&mut rng, &d);
        let Ok(c) = derive_constraints(&p) else { continue };
        let Ok(v) = sample_input(&mut rng, &c, &InputConfig::default()) else { continue };
        if let Err(e) = eval_program(&p, &v) {
            panic!("{p} on {v:?}: {e}");
        }
        checked += 1;
    }
}

#[test]
fn dataset_files_round_trip_byte_for_byte() {
    let mut rng = SeededRng::seed_from_u64(3);
    let cfg = GeneratorConfig::default();
    let mut instances: Vec<_> = (0..20).map(|_| generate_instance(&mut rng, &cfg).unwrap()).collect();
    instances[0] = inject_noise(&mut rng, &instances[0], NoiseSpec { chars: 2 });
    instances[1].reference = None;
    let mut first = Vec::new();
    write_dataset(&mut first, &instances).unwrap();
    let back = read_dataset(first.as_slice()).unwrap();
    assert_eq!(back, instances);
    let mut second = Vec::new();
    write_dataset(&mut second, &back).unwrap();
    assert_eq!(first, second);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noise_touches_only_observed_examples(seed in any::<u64>(), n in 0usize..6) {
        let mut rng = SeededRng::seed_from_u64(seed);
        let clean = generate_instance(&mut rng, &GeneratorConfig::default()).unwrap();
        let noisy = inject_noise(&mut rng, &clean, NoiseSpec { chars: n });
        prop_assert_eq!(&noisy.assessment, &clean.assessment);
        prop_assert_eq!(&noisy.reference, &clean.reference);
        let total: usize = clean
            .observed
            .iter()
            .zip(&noisy.observed)
            .map(|(a, b)| edit_distance(&a.input, &b.input) + edit_distance(&a.output, &b.output))
            .sum();
        prop_assert_eq!(total, n);
        if n == 0 {
            prop_assert_eq!(&noisy, &clean);
        }
        if n == 1 {
            let changed = clean
                .observed
                .iter()
                .zip(&noisy.observed)
                .filter(|(a, b)| a != b)
                .count();
            prop_assert_eq!(changed, 1);
        }
    }

    #[test]
    fn generation_is_a_function_of_the_seed(seed in any::<u64>()) {
        let cfg = GeneratorConfig::toy();
        let a = generate_instance(&mut SeededRng::seed_from_u64(seed), &cfg).unwrap();
        let b = generate_instance(&mut SeededRng::seed_from_u64(seed), &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}
