#![allow(dead_code)]

use pbe_core::dsl::{parse_program, tokenize_program};
use pbe_core::generator::{Example, Instance};
use pbe_core::model::{encode_chars, Architecture, Batch, Mode, Model, NetworkConfig, CHAR_EOS};
use pbe_core::nn::{check_gradients, TensorCheck};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn instance(pairs: &[(&str, &str)], program: &str) -> Instance {
    Instance {
        observed: pairs.iter().map(|&(i, o)| Example::new(i, o)).collect(),
        assessment: Vec::new(),
        reference: Some(parse_program(program).unwrap()),
        noise: 0,
    }
}

/// Two instances with two observed examples each.
pub fn tiny_batch(mode: Mode) -> Batch {
    let pairs = [[("ab Cd", "Cd"), ("x yz", "yz")], [("Q-9", "9"), ("7 k", "k")]];
    let programs = ["GetToken(Word, -1)", "SubStr(-1, -1)"];
    let mut batch = Batch { n: 2, inputs: vec![], outputs: vec![], queries: vec![], targets: vec![] };
    for (ps, prog) in pairs.iter().zip(programs) {
        for (i, o) in ps {
            batch.inputs.push(encode_chars(i).unwrap());
            batch.outputs.push(encode_chars(o).unwrap());
        }
        match mode {
            Mode::Synthesis => batch.targets.push(tokenize_program(&parse_program(prog).unwrap())),
            Mode::Induction => {
                batch.queries.push(encode_chars("mn op").unwrap());
                let mut t = encode_chars("op").unwrap();
                t.push(CHAR_EOS);
                batch.targets.push(t);
            }
        }
    }
    batch
}

pub fn tiny_config(arch: Architecture, mode: Mode) -> NetworkConfig {
    let base = match mode {
        Mode::Synthesis => NetworkConfig::synthesis(arch),
        Mode::Induction => NetworkConfig::induction(),
    };
    NetworkConfig { hidden: 8, embedding: 4, init_scale: 0.3, ..base }
}

/// Finite-difference check of the full loss of `tiny_batch` for one network.
pub fn gradient_check(config: NetworkConfig, seed: u64) -> Vec<TensorCheck> {
    let model = Model::<f64>::new(config, seed).unwrap();
    let batch = tiny_batch(config.mode);
    let mut store = model.params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    check_gradients(&mut store, |g| model.forward(g, &batch).loss, 1e-3, 12, 1e-6, &mut rng)
}

/// Every network variant: four synthesis architectures and induction.
pub fn all_variants() -> Vec<(String, NetworkConfig)> {
    let mut v: Vec<_> = Architecture::ALL
        .iter()
        .map(|&a| (a.name().to_string(), tiny_config(a, Mode::Synthesis)))
        .collect();
    v.push(("induction".into(), tiny_config(Architecture::AttentionA, Mode::Induction)));
    v
}
