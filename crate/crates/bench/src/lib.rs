//! Inputs shared by the pipeline benchmarks.

use kinlog_core::story::derive_seed;
use kinlog_core::{Example, Generator, NamePool, Naming, Record, RuleBase};

/// `n` named examples of one level, seeded deterministically.
pub fn examples(rules: &RuleBase, level: usize, n: usize, seed: u64) -> Vec<Example> {
    let names = NamePool::default_pool();
    let gen = Generator::new(rules, &names).expect("shipped rulebase");
    (0..n)
        .map(|i| {
            gen.generate_example(level, Naming::Named, derive_seed(seed, &[i as u64]))
                .expect("generation")
        })
        .collect()
}

pub fn records(rules: &RuleBase, level: usize, n: usize, seed: u64) -> Vec<Record> {
    examples(rules, level, n, seed)
        .iter()
        .enumerate()
        .map(|(i, ex)| Record::build(i.to_string(), ex, rules).expect("proofs"))
        .collect()
}
