//! Brute-force oracles and generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use structbp::{
    AnnotatedSentence, DepTree, FactorConfig, FeatureExtractor, FeatureSet, Hypergraph, HypergraphBuilder, Instance,
    ArcMask, Token,
};

pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Every head vector over `0..=n` that reaches the root without cycles.
pub fn all_trees(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut heads = vec![0usize; n];
    loop {
        let ok = (0..n).all(|m| heads[m] != m + 1) && (1..=n).all(|m| {
            let mut cur = m;
            for _ in 0..=n {
                if cur == 0 {
                    return true;
                }
                cur = heads[cur - 1];
            }
            false
        });
        if ok {
            out.push(heads.clone());
        }
        let mut k = 0;
        loop {
            if k == n {
                return out;
            }
            heads[k] += 1;
            if heads[k] <= n {
                break;
            }
            heads[k] = 0;
            k += 1;
        }
    }
}

fn dominates(heads: &[usize], anc: usize, mut node: usize) -> bool {
    while node != 0 {
        if node == anc {
            return true;
        }
        node = heads[node - 1];
    }
    anc == 0
}

/// No crossing: each token strictly inside an arc's span descends from its head.
pub fn is_projective(heads: &[usize]) -> bool {
    (1..=heads.len()).all(|m| {
        let h = heads[m - 1];
        let (lo, hi) = (h.min(m), h.max(m));
        (lo + 1..hi).all(|k| dominates(heads, h, k))
    })
}

pub fn projective_trees(n: usize) -> Vec<Vec<usize>> {
    all_trees(n).into_iter().filter(|h| is_projective(h)).collect()
}

/// `(log Z, marginal[h][m])` of `p(y) ∝ exp Σ score(h, m)` over projective
/// trees using only allowed arcs.
pub fn brute_marginals(n: usize, score: impl Fn(usize, usize) -> f64, allowed: impl Fn(usize, usize) -> bool) -> (f64, Vec<Vec<f64>>) {
    let trees: Vec<(Vec<usize>, f64)> = projective_trees(n)
        .into_iter()
        .filter(|h| (1..=n).all(|m| allowed(h[m - 1], m)))
        .map(|h| {
            let s = (1..=n).map(|m| score(h[m - 1], m)).sum();
            (h, s)
        })
        .collect();
    let max = trees.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = trees.iter().map(|t| (t.1 - max).exp()).sum();
    let mut marg = vec![vec![0.0; n + 1]; n + 1];
    for (h, s) in &trees {
        let p = (s - max).exp() / z;
        for m in 1..=n {
            marg[h[m - 1]][m] += p;
        }
    }
    (max + z.ln(), marg)
}

/// Highest-scoring projective tree and its score.
pub fn brute_argmax(n: usize, score: impl Fn(usize, usize) -> f64) -> (Vec<usize>, f64) {
    projective_trees(n)
        .into_iter()
        .map(|h| {
            let s = (1..=n).map(|m| score(h[m - 1], m)).sum::<f64>();
            (h, s)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one tree")
}

/// Uniformly random (possibly non-projective) tree.
pub fn random_tree(rng: &mut impl Rng, n: usize) -> DepTree {
    let mut order: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut heads = vec![0; n];
    for (k, &m) in order.iter().enumerate() {
        heads[m - 1] = if k == 0 || rng.gen_bool(0.1) { 0 } else { order[rng.gen_range(0..k)] };
    }
    DepTree::new(heads).expect("attached to earlier nodes")
}

const TAGS: [&str; 6] = ["DT", "NN", "VB", "IN", "JJ", "."];

pub fn random_sentence(rng: &mut impl Rng, n: usize) -> AnnotatedSentence {
    AnnotatedSentence::new(
        (0..n)
            .map(|_| {
                let t = TAGS[rng.gen_range(0..TAGS.len())];
                Token::new(format!("w{}", rng.gen_range(0..5)), t).with_cpos(&t[..1])
            })
            .collect(),
    )
    .expect("non-empty")
}

pub fn random_instance(rng: &mut impl Rng, n: usize, factors: FactorConfig, bits: u32) -> Instance {
    let fx = FeatureExtractor::new(bits, FeatureSet::Full).unwrap();
    Instance::new(&random_sentence(rng, n), &ArcMask::full(n), factors, &fx).unwrap()
}

pub fn random_theta(rng: &mut impl Rng, bits: u32, scale: f64) -> Vec<f64> {
    (0..1usize << bits).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Distinct feature indices firing anywhere in the instance.
pub fn active_features(inst: &Instance) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..inst.features.num_rows())
        .flat_map(|k| inst.features.row(k).0.to_vec())
        .collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Random acyclic hypergraph: nodes are created in topological order, the
/// last one is the root, and each non-axiom node has 1 to 3 incoming edges
/// with 1 or 2 distinct earlier tails.
pub fn random_hypergraph(rng: &mut impl Rng, max_nodes: usize) -> Hypergraph {
    let n = rng.gen_range(3..=max_nodes);
    let axioms = rng.gen_range(1..=2.min(n - 1));
    let mut b = HypergraphBuilder::new();
    for _ in 0..n {
        b.add_node();
    }
    for j in axioms..n {
        for _ in 0..rng.gen_range(1..=3) {
            let a = rng.gen_range(0..j);
            let tails = if j >= 2 && rng.gen_bool(0.4) {
                let mut c = rng.gen_range(0..j);
                while c == a {
                    c = rng.gen_range(0..j);
                }
                vec![a, c]
            } else {
                vec![a]
            };
            b.add_edge(j, &tails, rng.gen_range(0.5..2.0));
        }
    }
    b.build(n - 1).expect("acyclic by construction")
}

/// Number of derivations of each node, saturating.
pub fn derivation_counts(hg: &Hypergraph) -> Vec<u64> {
    let mut count = vec![0u64; hg.num_nodes()];
    for v in 0..hg.num_nodes() {
        if hg.is_axiom(v) {
            count[v] = 1;
            continue;
        }
        let mut c = 0u64;
        for e in hg.incoming(v) {
            let mut p = 1u64;
            for t in hg.tails(e) {
                p = p.saturating_mul(count[t]);
            }
            c = c.saturating_add(p);
        }
        count[v] = c;
    }
    count
}

/// All derivations of `node` as edge lists. Nodes are assumed numbered in
/// topological order.
pub fn derivations(hg: &Hypergraph, node: usize) -> Vec<Vec<usize>> {
    if hg.is_axiom(node) {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for e in hg.incoming(node) {
        let mut partial: Vec<Vec<usize>> = vec![vec![e]];
        for t in hg.tails(e) {
            let sub = derivations(hg, t);
            partial = partial
                .iter()
                .flat_map(|p| {
                    sub.iter().map(move |s| {
                        let mut d = p.clone();
                        d.extend(s);
                        d
                    })
                })
                .collect();
        }
        out.extend(partial);
    }
    out
}
