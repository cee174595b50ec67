//! Brute-force oracles shared by unit tests.

use crate::tree::DepTree;

/// Every projective tree over `n` tokens, as head arrays.
pub fn projective_trees(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut heads = vec![0usize; n];
    loop {
        if let Ok(t) = DepTree::new(heads.clone()) {
            if t.is_projective() {
                out.push(heads.clone());
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            heads[i] += 1;
            if heads[i] <= n {
                break;
            }
            heads[i] = 0;
            i += 1;
        }
    }
}

#[test]
fn projective_tree_counts() {
    let counts: Vec<usize> = (1..=4).map(|n| projective_trees(n).len()).collect();
    assert_eq!(counts, vec![1, 3, 12, 55]);
}
