//! Per-sentence factor graph: one binary variable per allowed arc, a unary
//! factor per variable, optional grandparent and sibling pair factors, and
//! the global projective-tree (PTree) factor.

use std::fmt;
use std::str::FromStr;

use crate::eisner::EisnerChart;
use crate::error::{Error, Result};
use crate::features::{FactorDescriptor, FeatureExtractor, SentenceAtoms};
use crate::sentence::AnnotatedSentence;
use crate::tree::ArcMask;

/// Log-potentials are clamped to this magnitude.
pub const MAX_SCORE: f64 = 500.0;

/// Which factor families to instantiate. Unary and PTree factors are always
/// present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct FactorConfig {
    pub grand: bool,
    pub sib: bool,
}

impl FactorConfig {
    pub const FIRST_ORDER: FactorConfig = FactorConfig { grand: false, sib: false };
    pub const SECOND_ORDER: FactorConfig = FactorConfig { grand: true, sib: true };

    pub fn is_first_order(&self) -> bool {
        !self.grand && !self.sib
    }

    pub fn to_bits(self) -> u8 {
        self.grand as u8 | (self.sib as u8) << 1
    }

    pub fn from_bits(bits: u8) -> Result<Self> {
        if bits > 3 {
            return Err(Error::InvalidArgument(format!("factor bits {bits}")));
        }
        Ok(FactorConfig {
            grand: bits & 1 != 0,
            sib: bits & 2 != 0,
        })
    }
}

impl FromStr for FactorConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut cfg = FactorConfig::default();
        let mut unary = false;
        for part in s.split(',').map(str::trim) {
            match part {
                "unary" => unary = true,
                "grand" => cfg.grand = true,
                "sib" => cfg.sib = true,
                other => return Err(Error::InvalidArgument(format!("unknown factor kind '{other}'"))),
            }
        }
        if !unary {
            return Err(Error::InvalidArgument("factor list must include 'unary'".into()));
        }
        Ok(cfg)
    }
}

impl fmt::Display for FactorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("unary")?;
        if self.grand {
            f.write_str(",grand")?;
        }
        if self.sib {
            f.write_str(",sib")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    Unary,
    Grand,
    Sib,
}

/// A factor with an explicit potential table. Unary factors use `vars[0]`
/// only; pair factors score the both-ON configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExplicitFactor {
    pub kind: FactorKind,
    pub vars: [u32; 2],
    pub desc: FactorDescriptor,
}

#[derive(Debug, Clone)]
pub struct FactorGraph {
    config: FactorConfig,
    chart: EisnerChart,
    factors: Vec<ExplicitFactor>,
    pair_offsets: Vec<u32>,
    pair_links: Vec<(u32, u8)>,
}

impl FactorGraph {
    /// Builds the graph over the arcs allowed by `mask`. Factors are ordered:
    /// unary in variable order, then grandparent, then sibling.
    pub fn new(mask: &ArcMask, config: FactorConfig) -> Result<Self> {
        let chart = EisnerChart::new(mask)?;
        let n = chart.len();
        let arcs = chart.arcs().to_vec();
        let mut factors: Vec<ExplicitFactor> = arcs
            .iter()
            .enumerate()
            .map(|(i, &(h, m))| ExplicitFactor {
                kind: FactorKind::Unary,
                vars: [i as u32, i as u32],
                desc: FactorDescriptor::Arc { head: h, dep: m },
            })
            .collect();

        if config.grand {
            for (c, &(h, m)) in arcs.iter().enumerate() {
                if h == 0 {
                    continue;
                }
                for g in 0..=n {
                    if let Some(p) = chart.arc_index(g, h) {
                        factors.push(ExplicitFactor {
                            kind: FactorKind::Grand,
                            vars: [p as u32, c as u32],
                            desc: FactorDescriptor::Grand { grand: g, head: h, dep: m },
                        });
                    }
                }
            }
        }
        if config.sib {
            for h in 0..=n {
                let kids: Vec<(usize, usize)> =
                    (1..=n).filter_map(|m| chart.arc_index(h, m).map(|a| (m, a))).collect();
                for (x, &(m, a)) in kids.iter().enumerate() {
                    for &(s, b) in &kids[x + 1..] {
                        factors.push(ExplicitFactor {
                            kind: FactorKind::Sib,
                            vars: [a as u32, b as u32],
                            desc: FactorDescriptor::Sib { head: h, dep: m, sib: s },
                        });
                    }
                }
            }
        }

        let v = arcs.len();
        let mut counts = vec![0u32; v + 1];
        for f in &factors[v..] {
            counts[f.vars[0] as usize + 1] += 1;
            counts[f.vars[1] as usize + 1] += 1;
        }
        for i in 0..v {
            counts[i + 1] += counts[i];
        }
        let pair_offsets = counts;
        let mut fill = pair_offsets.clone();
        let mut pair_links = vec![(0u32, 0u8); *pair_offsets.last().unwrap() as usize];
        for (k, f) in factors.iter().enumerate().skip(v) {
            for slot in 0..2 {
                let var = f.vars[slot] as usize;
                pair_links[fill[var] as usize] = (k as u32, slot as u8);
                fill[var] += 1;
            }
        }

        Ok(FactorGraph {
            config,
            chart,
            factors,
            pair_offsets,
            pair_links,
        })
    }

    pub fn config(&self) -> FactorConfig {
        self.config
    }

    pub fn chart(&self) -> &EisnerChart {
        &self.chart
    }

    /// Sentence length.
    pub fn len(&self) -> usize {
        self.chart.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chart.is_empty()
    }

    pub fn num_vars(&self) -> usize {
        self.chart.num_arcs()
    }

    /// Arc `(head, dep)` of each variable.
    pub fn arcs(&self) -> &[(usize, usize)] {
        self.chart.arcs()
    }

    pub fn var_index(&self, head: usize, dep: usize) -> Option<usize> {
        self.chart.arc_index(head, dep)
    }

    pub fn factors(&self) -> &[ExplicitFactor] {
        &self.factors
    }

    /// Index of the first pair factor; factors before it are unary.
    pub fn first_pair(&self) -> usize {
        self.num_vars()
    }

    pub fn num_pair_factors(&self) -> usize {
        self.factors.len() - self.num_vars()
    }

    /// Pair factors touching `var`, with the slot `var` occupies in each.
    pub fn pair_links(&self, var: usize) -> &[(u32, u8)] {
        &self.pair_links[self.pair_offsets[var] as usize..self.pair_offsets[var + 1] as usize]
    }

    /// The mask of arcs that have variables.
    pub fn mask(&self) -> ArcMask {
        let mut m = ArcMask::empty(self.len());
        for &(h, d) in self.arcs() {
            m.set(h, d, true);
        }
        m
    }

    /// Number of factors adjacent to `var`, PTree included.
    pub fn degree(&self, var: usize) -> usize {
        2 + self.pair_links(var).len()
    }
}

/// Feature rows for every explicit factor of a graph, in CSR layout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    offsets: Vec<u32>,
    index: Vec<u32>,
    count: Vec<f64>,
}

impl FeatureTable {
    pub fn extract(graph: &FactorGraph, fx: &FeatureExtractor, atoms: &SentenceAtoms) -> Self {
        let mut offsets = Vec::with_capacity(graph.factors().len() + 1);
        offsets.push(0u32);
        let mut index = Vec::new();
        let mut count = Vec::new();
        let mut raw = Vec::with_capacity(96);
        for f in graph.factors() {
            raw.clear();
            fx.extract_into(atoms, f.desc, &mut raw);
            raw.sort_unstable();
            let mut last = u32::MAX;
            for &i in &raw {
                if i == last {
                    *count.last_mut().unwrap() += 1.0;
                } else {
                    index.push(i);
                    count.push(1.0);
                    last = i;
                }
            }
            offsets.push(index.len() as u32);
        }
        FeatureTable { offsets, index, count }
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn row(&self, k: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[k] as usize, self.offsets[k + 1] as usize);
        (&self.index[a..b], &self.count[a..b])
    }

    pub fn dot(&self, k: usize, theta: &[f64]) -> f64 {
        let (idx, cnt) = self.row(k);
        idx.iter().zip(cnt).map(|(&i, &c)| theta[i as usize] * c).sum()
    }

    pub fn add_scaled(&self, k: usize, scale: f64, out: &mut [f64]) {
        let (idx, cnt) = self.row(k);
        for (&i, &c) in idx.iter().zip(cnt) {
            out[i as usize] += scale * c;
        }
    }

    /// Clamped log-potential `θ·f_α` of every factor.
    pub fn scores(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.num_rows())
            .map(|k| self.dot(k, theta).clamp(-MAX_SCORE, MAX_SCORE))
            .collect()
    }

    /// Pulls per-factor score adjoints back onto θ. Clamped scores pass no
    /// gradient.
    pub fn backprop_scores(&self, scores: &[f64], score_adj: &[f64], grad: &mut [f64]) {
        for (k, (&s, &g)) in scores.iter().zip(score_adj).enumerate() {
            if g != 0.0 && s.abs() < MAX_SCORE {
                self.add_scaled(k, g, grad);
            }
        }
    }
}

/// A sentence's factor graph together with its factor features.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: FactorGraph,
    pub features: FeatureTable,
}

impl Instance {
    pub fn new(
        sentence: &AnnotatedSentence,
        mask: &ArcMask,
        config: FactorConfig,
        fx: &FeatureExtractor,
    ) -> Result<Self> {
        if mask.len() != sentence.len() {
            return Err(Error::LengthMismatch {
                left: mask.len(),
                right: sentence.len(),
            });
        }
        let graph = FactorGraph::new(mask, config)?;
        let features = FeatureTable::extract(&graph, fx, &SentenceAtoms::new(sentence));
        Ok(Instance { graph, features })
    }

    pub fn scores(&self, theta: &[f64]) -> Vec<f64> {
        self.features.scores(theta)
    }
}

/// Potential value of one factor under an assignment (ON = `true`).
pub fn factor_potential(kind: FactorKind, assignment: &[bool], score: f64) -> f64 {
    let s = score.clamp(-MAX_SCORE, MAX_SCORE);
    let on = match kind {
        FactorKind::Unary => assignment[0],
        FactorKind::Grand | FactorKind::Sib => assignment[0] && assignment[1],
    };
    if on {
        s.exp()
    } else {
        1.0
    }
}

/// Dense weight vector over the hashed feature space plus AdaGrad state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub theta: Vec<f64>,
    pub accum: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(bits: u32) -> Self {
        let d = 1usize << bits;
        ModelParams {
            theta: vec![0.0; d],
            accum: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn norm(&self) -> f64 {
        self.theta.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}
