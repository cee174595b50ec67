//! Length bounds and first-order marginal pruning of candidate parents.

use std::collections::BTreeMap;

use crate::eisner::EisnerChart;
use crate::error::{Error, Result};
use crate::factor_graph::{FactorConfig, Instance};
use crate::features::{FeatureExtractor, FeatureSet};
use crate::objectives::mbr_decode_scores;
use crate::sentence::AnnotatedSentence;
use crate::tree::{ArcMask, DepTree};

pub const ROOT_TAG: &str = "<ROOT>";
pub const PRUNE_RATIO: f64 = 1e-4;
pub const MAX_PARENTS: usize = 10;

/// Side of the parent the child sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub fn of(head: usize, dep: usize) -> Self {
        if dep > head {
            Direction::Right
        } else {
            Direction::Left
        }
    }
}

fn fine_tag(s: &AnnotatedSentence, i: usize) -> &str {
    if i == 0 {
        ROOT_TAG
    } else {
        &s.token(i).pos
    }
}

/// Maximum observed arc length per (parent tag, child tag, direction).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LengthBoundTable {
    bounds: BTreeMap<(String, String, Direction), usize>,
}

impl LengthBoundTable {
    pub fn fit<'a>(corpus: impl IntoIterator<Item = (&'a AnnotatedSentence, &'a DepTree)>) -> Result<Self> {
        let mut table = LengthBoundTable::default();
        let mut seen = 0;
        for (s, tree) in corpus {
            if s.len() != tree.len() {
                return Err(Error::LengthMismatch {
                    left: s.len(),
                    right: tree.len(),
                });
            }
            seen += 1;
            for (h, m) in tree.arcs() {
                table.observe(fine_tag(s, h), fine_tag(s, m), Direction::of(h, m), h.abs_diff(m));
            }
        }
        if seen == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok(table)
    }

    pub fn observe(&mut self, parent: &str, child: &str, dir: Direction, length: usize) {
        let e = self
            .bounds
            .entry((parent.to_string(), child.to_string(), dir))
            .or_insert(0);
        *e = (*e).max(length);
    }

    pub fn bound(&self, parent: &str, child: &str, dir: Direction) -> Option<usize> {
        self.bounds
            .get(&(parent.to_string(), child.to_string(), dir))
            .copied()
    }

    /// Length-1 arcs are always allowed.
    pub fn allows(&self, sentence: &AnnotatedSentence, head: usize, dep: usize) -> bool {
        let len = head.abs_diff(dep);
        len == 1
            || self
                .bound(fine_tag(sentence, head), fine_tag(sentence, dep), Direction::of(head, dep))
                .is_some_and(|b| b >= len)
    }

    pub fn mask(&self, sentence: &AnnotatedSentence) -> ArcMask {
        let n = sentence.len();
        let mut mask = ArcMask::empty(n);
        for m in 1..=n {
            for h in (0..=n).filter(|&h| h != m) {
                if self.allows(sentence, h, m) {
                    mask.set(h, m, true);
                }
            }
        }
        mask
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, Direction, usize)> {
        self.bounds
            .iter()
            .map(|((p, c, d), &b)| (p.as_str(), c.as_str(), *d, b))
    }
}

/// Keeps, per token, parents with marginal ≥ `PRUNE_RATIO`·max, then the
/// `MAX_PARENTS` largest (ties go to the lower head). `marginals[m-1]` lists
/// `(head, p)` pairs for token `m`.
pub fn select_parents(marginals: &[Vec<(usize, f64)>]) -> Vec<Vec<usize>> {
    marginals
        .iter()
        .map(|cands| {
            let max = cands.iter().map(|c| c.1).fold(0.0, f64::max);
            let mut kept: Vec<(usize, f64)> = cands
                .iter()
                .copied()
                .filter(|&(_, p)| max > 0.0 && p >= PRUNE_RATIO * max)
                .collect();
            kept.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            kept.truncate(MAX_PARENTS);
            let mut heads: Vec<usize> = kept.into_iter().map(|c| c.0).collect();
            heads.sort_unstable();
            heads
        })
        .collect()
}

/// Arcs and their marginals, index-aligned.
pub type ArcList = (Vec<(usize, usize)>, Vec<f64>);

/// A first-order model with exact inference used to restrict parents.
#[derive(Debug, Clone, PartialEq)]
pub struct Pruner {
    pub theta: Vec<f64>,
    pub bounds: LengthBoundTable,
    extractor: FeatureExtractor,
}

impl Pruner {
    pub fn new(theta: Vec<f64>, bounds: LengthBoundTable, hash_bits: u32) -> Result<Self> {
        let extractor = FeatureExtractor::new(hash_bits, FeatureSet::Pruner)?;
        if theta.len() != extractor.dim() {
            return Err(Error::ShapeMismatch {
                expected: extractor.dim(),
                found: theta.len(),
            });
        }
        Ok(Pruner {
            theta,
            bounds,
            extractor,
        })
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    pub fn hash_bits(&self) -> u32 {
        self.extractor.bits()
    }

    /// Length-bound mask, plus the gold arcs when given.
    pub fn base_mask(&self, sentence: &AnnotatedSentence, gold: Option<&DepTree>) -> ArcMask {
        let mut mask = self.bounds.mask(sentence);
        if let Some(g) = gold {
            for (h, m) in g.arcs() {
                mask.set(h, m, true);
            }
        }
        mask
    }

    /// Exact first-order arc marginals over `mask`, in chart arc order.
    pub fn marginals(&self, sentence: &AnnotatedSentence, mask: &ArcMask) -> Result<ArcList> {
        let inst = Instance::new(sentence, mask, FactorConfig::FIRST_ORDER, &self.extractor)?;
        let chart: &EisnerChart = inst.graph.chart();
        let io = chart.inside_outside(&inst.scores(&self.theta))?;
        Ok((chart.arcs().to_vec(), chart.arc_marginals(&io)))
    }

    /// The pruned mask. With `gold` (training mode) every gold arc survives.
    /// Arcs of the pruner's MBR tree always survive, so the mask admits a
    /// projective tree.
    pub fn prune_parents(&self, sentence: &AnnotatedSentence, gold: Option<&DepTree>) -> Result<ArcMask> {
        let n = sentence.len();
        if let Some(g) = gold {
            if g.len() != n {
                return Err(Error::LengthMismatch { left: g.len(), right: n });
            }
        }
        let base = self.base_mask(sentence, gold);
        let (arcs, marg) = self.marginals(sentence, &base)?;
        let mut per_token: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(h, m), &p) in arcs.iter().zip(&marg) {
            per_token[m - 1].push((h, p));
        }
        let mut mask = ArcMask::empty(n);
        for (m, heads) in select_parents(&per_token).into_iter().enumerate() {
            for h in heads {
                mask.set(h, m + 1, true);
            }
        }
        for (h, m) in mbr_decode_scores(n, &arcs, &marg)?.arcs() {
            mask.set(h, m, true);
        }
        if let Some(g) = gold {
            for (h, m) in g.arcs() {
                mask.set(h, m, true);
            }
        }
        Ok(mask)
    }
}
