mod common;

use common::{brute_marginals, random_instance, random_theta};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use structbp::{run_bp, FactorConfig};

fn config(k: u8) -> FactorConfig {
    FactorConfig::from_bits(k).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn first_order_bp_is_exact(seed in any::<u64>(), n in 1usize..=5, t_max in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, n, FactorConfig::FIRST_ORDER, 8);
        let scores = inst.scores(&random_theta(&mut rng, 8, 3.0));
        let bp = run_bp(&inst.graph, &scores, t_max, false).unwrap();
        let (_, marg) = brute_marginals(n, |h, m| scores[inst.graph.var_index(h, m).unwrap()], |_, _| true);
        for (i, &(h, m)) in inst.graph.arcs().iter().enumerate() {
            prop_assert!((bp.beliefs.on(i) - marg[h][m]).abs() < 1e-10);
        }
    }

    #[test]
    fn beliefs_are_normalized_every_iteration(seed in any::<u64>(), n in 1usize..=7, t_max in 1usize..=5, k in 0u8..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, n, config(k), 8);
        let scores = inst.scores(&random_theta(&mut rng, 8, 2.0));
        let bp = run_bp(&inst.graph, &scores, t_max, true).unwrap();
        let tape = bp.tape.as_ref().unwrap();
        prop_assert_eq!(tape.iterations.len(), t_max);
        let trace = tape.belief_trace(&inst.graph);
        prop_assert_eq!(trace.len(), t_max);
        for b in &trace {
            prop_assert!(b.iter().all(|&x| (0.0..=1.0).contains(&x) && x.is_finite()));
        }
        for i in 0..bp.beliefs.len() {
            prop_assert!((bp.beliefs.on(i) + bp.beliefs.off(i) - 1.0).abs() < 1e-12);
        }
        for p in &bp.beliefs.pair {
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let last = trace.last().unwrap();
        for (i, &x) in last.iter().enumerate() {
            prop_assert!((x - bp.beliefs.on(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn bp_is_deterministic_and_replayable(seed in any::<u64>(), n in 1usize..=6, t_max in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, n, FactorConfig::SECOND_ORDER, 8);
        let scores = inst.scores(&random_theta(&mut rng, 8, 2.0));
        let a = run_bp(&inst.graph, &scores, t_max, true).unwrap();
        let b = run_bp(&inst.graph, &scores, t_max, true).unwrap();
        prop_assert_eq!(&a.tape, &b.tape);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a.beliefs.logit), bits(&b.beliefs.logit));
        a.tape.as_ref().unwrap().replay(&inst.graph).unwrap();
    }

    #[test]
    fn extreme_scores_stay_finite(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, n, FactorConfig::SECOND_ORDER, 8);
        let scores = inst.scores(&random_theta(&mut rng, 8, 400.0));
        let bp = run_bp(&inst.graph, &scores, 3, false).unwrap();
        prop_assert!(bp.beliefs.logit.iter().all(|x| !x.is_nan()));
        prop_assert!((0..bp.beliefs.len()).all(|i| (0.0..=1.0).contains(&bp.beliefs.on(i))));
    }
}

#[test]
fn zero_iterations_is_an_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inst = random_instance(&mut rng, 3, FactorConfig::SECOND_ORDER, 8);
    let scores = inst.scores(&random_theta(&mut rng, 8, 1.0));
    assert!(run_bp(&inst.graph, &scores, 0, false).is_err());
}
