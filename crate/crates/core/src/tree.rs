//! Dependency trees and per-sentence arc masks.
//!
//! Token positions run `1..=n`; position 0 is the artificial ROOT.

use crate::error::{Error, Result};

/// A dependency tree given by one head per token. May be non-projective.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DepTree {
    heads: Vec<usize>,
}

impl DepTree {
    /// `heads[m - 1]` is the head of token `m`.
    pub fn new(heads: Vec<usize>) -> Result<Self> {
        let n = heads.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty tree".into()));
        }
        for (i, &h) in heads.iter().enumerate() {
            if h > n || h == i + 1 {
                return Err(Error::InvalidArgument(format!(
                    "token {} has invalid head {h}",
                    i + 1
                )));
            }
        }
        if has_cycle(&heads) {
            return Err(Error::Cycle { line: 0 });
        }
        Ok(DepTree { heads })
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    /// Head of token `m` (1-based).
    pub fn head(&self, m: usize) -> usize {
        self.heads[m - 1]
    }

    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    /// Arcs `(head, dependent)` in dependent order.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.heads.iter().enumerate().map(|(i, &h)| (h, i + 1))
    }

    pub fn contains(&self, head: usize, dep: usize) -> bool {
        dep >= 1 && dep <= self.len() && self.heads[dep - 1] == head
    }

    /// True when no two arcs cross with ROOT drawn at position 0.
    pub fn is_projective(&self) -> bool {
        let spans: Vec<(usize, usize)> = self
            .arcs()
            .map(|(h, m)| (h.min(m), h.max(m)))
            .collect();
        for (i, &(a, b)) in spans.iter().enumerate() {
            for &(c, d) in &spans[i + 1..] {
                if (a < c && c < b && b < d) || (c < a && a < d && d < b) {
                    return false;
                }
            }
        }
        true
    }
}

fn has_cycle(heads: &[usize]) -> bool {
    // 0 = unvisited, 1 = on current path, 2 = reaches ROOT
    let mut state = vec![0u8; heads.len() + 1];
    state[0] = 2;
    for start in 1..=heads.len() {
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = heads[v - 1];
        }
        if state[v] == 1 {
            return true;
        }
        for p in path {
            state[p] = 2;
        }
    }
    false
}

/// A dependency tree known to be projective.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProjTree(DepTree);

impl ProjTree {
    pub fn new(heads: Vec<usize>) -> Result<Self> {
        Self::try_from(DepTree::new(heads)?)
    }

    pub fn as_tree(&self) -> &DepTree {
        &self.0
    }

    pub fn into_tree(self) -> DepTree {
        self.0
    }
}

impl TryFrom<DepTree> for ProjTree {
    type Error = Error;

    fn try_from(tree: DepTree) -> Result<Self> {
        if tree.is_projective() {
            Ok(ProjTree(tree))
        } else {
            Err(Error::NonProjectiveGold)
        }
    }
}

impl std::ops::Deref for ProjTree {
    type Target = DepTree;

    fn deref(&self) -> &DepTree {
        &self.0
    }
}

/// Allowed arcs `h → m` for one sentence (`h ∈ 0..=n`, `m ∈ 1..=n`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArcMask {
    n: usize,
    allowed: Vec<bool>,
}

impl ArcMask {
    /// Every arc except self-loops.
    pub fn full(n: usize) -> Self {
        let mut allowed = vec![false; (n + 1) * (n + 1)];
        for h in 0..=n {
            for m in 1..=n {
                allowed[h * (n + 1) + m] = h != m;
            }
        }
        ArcMask { n, allowed }
    }

    pub fn empty(n: usize) -> Self {
        ArcMask {
            n,
            allowed: vec![false; (n + 1) * (n + 1)],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn allowed(&self, head: usize, dep: usize) -> bool {
        self.allowed[head * (self.n + 1) + dep]
    }

    pub fn set(&mut self, head: usize, dep: usize, allowed: bool) {
        assert!(dep >= 1 && dep <= self.n && head <= self.n && head != dep);
        self.allowed[head * (self.n + 1) + dep] = allowed;
    }

    /// Allowed parents of token `dep`, ascending.
    pub fn parents(&self, dep: usize) -> impl Iterator<Item = usize> + '_ {
        (0..=self.n).filter(move |&h| self.allowed(h, dep))
    }

    pub fn num_allowed(&self) -> usize {
        self.allowed.iter().filter(|&&a| a).count()
    }

    /// Fails with the first token that has no allowed parent.
    pub fn check_feasible(&self) -> Result<()> {
        for m in 1..=self.n {
            if self.parents(m).next().is_none() {
                return Err(Error::InfeasibleMask { token: m });
            }
        }
        Ok(())
    }
}
