//! Fixtures shared by the benchmarks and examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use structbp::{AnnotatedSentence, ArcMask, DepTree, EdgeWeightMatrix, FactorConfig, FeatureExtractor, FeatureSet, Instance, Token};

const TAGS: [&str; 6] = ["DT", "NN", "VB", "IN", "JJ", "."];

pub fn random_sentence(n: usize, seed: u64) -> AnnotatedSentence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tokens = (0..n)
        .map(|_| {
            let t = TAGS[rng.gen_range(0..TAGS.len())];
            Token::new(format!("w{}", rng.gen_range(0..50)), t)
        })
        .collect();
    AnnotatedSentence::new(tokens).expect("non-empty")
}

/// Fully connected instance over a random sentence.
pub fn instance(n: usize, factors: FactorConfig, bits: u32, seed: u64) -> Instance {
    let fx = FeatureExtractor::new(bits, FeatureSet::Full).expect("valid bits");
    Instance::new(&random_sentence(n, seed), &ArcMask::full(n), factors, &fx).expect("consistent shapes")
}

pub fn random_theta(bits: u32, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..1usize << bits).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn random_weights(n: usize, seed: u64) -> EdgeWeightMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EdgeWeightMatrix::from_fn(n, |_, _| rng.gen_range(0.1..2.0))
}

/// Right-branching chain `0 -> 1 -> ... -> n`.
pub fn chain_tree(n: usize) -> DepTree {
    DepTree::new((0..n).collect()).expect("chain is a tree")
}
