//! Loopy belief propagation with the structured PTree factor.
//!
//! Binary messages are stored as log-odds `log m(ON) - log m(OFF)`, which is
//! the normalized 2-vector up to a monotone change of variables. Messages out
//! of the PTree factor are clamped to `±ln(1e30)`, the log-odds image of a
//! `1e-30` floor on each component. Explicit factor messages are bounded by
//! their log-potentials and need no clamp.
//!
//! Each iteration follows a spanning tree rooted at the PTree factor:
//! explicit factors to variables, variables to PTree, PTree to variables,
//! variables to explicit factors. Every message is sent once per iteration.

use std::io::{self, Write};

use crate::eisner::EisnerChart;
use crate::error::{Error, Result};
use crate::factor_graph::{FactorGraph, FactorKind};
use crate::hypergraph::{InsideOutside, LogSum};

/// `ln(1e30)`.
pub const MESSAGE_CLAMP: f64 = 69.077_552_789_821_37;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `log σ(x)`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

/// Normalized `(ON, OFF)` pair for a log-odds message.
pub fn to_distribution(log_odds: f64) -> (f64, f64) {
    (sigmoid(log_odds), sigmoid(-log_odds))
}

/// All messages of one BP state, as log-odds.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSet {
    /// Unary factor → its variable.
    pub unary: Vec<f64>,
    /// Pair factor → its two variables, indexed from the first pair factor.
    pub pair_to_var: Vec<[f64; 2]>,
    /// Variables → pair factor.
    pub var_to_pair: Vec<[f64; 2]>,
    pub var_to_ptree: Vec<f64>,
    pub ptree_to_var: Vec<f64>,
}

impl MessageSet {
    fn uniform(graph: &FactorGraph) -> Self {
        let v = graph.num_vars();
        let p = graph.num_pair_factors();
        MessageSet {
            unary: vec![0.0; v],
            pair_to_var: vec![[0.0; 2]; p],
            var_to_pair: vec![[0.0; 2]; p],
            var_to_ptree: vec![0.0; v],
            ptree_to_var: vec![0.0; v],
        }
    }
}

/// Result of one PTree message computation.
#[derive(Debug, Clone, PartialEq)]
pub struct PtreeState {
    pub io: InsideOutside,
    /// `log p_i`, the arc marginal under weights `exp(var_to_ptree)`.
    pub log_marginal: Vec<f64>,
    /// `log (1 - p_i)`, summed over the competing heads of the same token.
    pub log_complement: Vec<f64>,
    /// Outgoing log-odds before clamping.
    pub raw: Vec<f64>,
    /// Outgoing log-odds after clamping.
    pub outgoing: Vec<f64>,
}

impl PtreeState {
    pub fn marginal(&self, var: usize) -> f64 {
        self.log_marginal[var].exp()
    }
}

/// Message from an explicit factor with log-potential `score` to one of its
/// variables, given the message arriving from the other variable (ignored
/// for unary factors).
#[inline]
pub fn send_explicit_factor_message(kind: FactorKind, score: f64, other: f64) -> f64 {
    match kind {
        FactorKind::Unary => score,
        FactorKind::Grand | FactorKind::Sib => softplus(score + other) - softplus(other),
    }
}

/// Computes every PTree → variable message with one inside-outside pass.
pub fn send_ptree_messages(chart: &EisnerChart, incoming: &[f64]) -> Result<PtreeState> {
    let io = chart.inside_outside(incoming)?;
    let v = chart.num_arcs();
    let mut log_marginal = vec![f64::NEG_INFINITY; v];
    for (a, lp) in log_marginal.iter_mut().enumerate() {
        if let Some(node) = chart.arc_node(a) {
            *lp = (io.log_alpha[node] + io.log_beta[node] - io.log_partition).min(0.0);
        }
    }
    let mut log_complement = vec![f64::NEG_INFINITY; v];
    for (lo, hi) in dependent_blocks(chart) {
        let k = hi - lo;
        let mut suffix = vec![f64::NEG_INFINITY; k + 1];
        let mut acc = LogSum::new();
        for j in (0..k).rev() {
            acc.add(log_marginal[lo + j]);
            suffix[j] = acc.value();
        }
        let mut prefix = LogSum::new();
        for j in 0..k {
            let mut q = prefix;
            q.add(suffix[j + 1]);
            log_complement[lo + j] = q.value();
            prefix.add(log_marginal[lo + j]);
        }
    }
    let raw: Vec<f64> = (0..v)
        .map(|a| log_marginal[a] - log_complement[a] - incoming[a])
        .collect();
    let outgoing = raw.iter().map(|&x| x.clamp(-MESSAGE_CLAMP, MESSAGE_CLAMP)).collect();
    Ok(PtreeState {
        io,
        log_marginal,
        log_complement,
        raw,
        outgoing,
    })
}

/// Contiguous variable ranges sharing a dependent (variables are ordered by
/// dependent, then head).
pub(crate) fn dependent_blocks(chart: &EisnerChart) -> Vec<(usize, usize)> {
    let arcs = chart.arcs();
    let mut out = Vec::with_capacity(chart.len());
    let mut lo = 0;
    for a in 1..=arcs.len() {
        if a == arcs.len() || arcs[a].1 != arcs[lo].1 {
            out.push((lo, a));
            lo = a;
        }
    }
    out
}

/// Normalized beliefs.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefSet {
    /// Log-odds of `b_i(ON)`.
    pub logit: Vec<f64>,
    /// Pair factor beliefs over `[OFF·OFF, OFF·ON, ON·OFF, ON·ON]`
    /// (first variable major), indexed from the first pair factor.
    pub pair: Vec<[f64; 4]>,
    /// Arc marginals of the PTree factor's last inside-outside pass.
    pub ptree: Vec<f64>,
}

impl BeliefSet {
    pub fn on(&self, var: usize) -> f64 {
        sigmoid(self.logit[var])
    }

    pub fn off(&self, var: usize) -> f64 {
        sigmoid(-self.logit[var])
    }

    pub fn on_all(&self) -> Vec<f64> {
        self.logit.iter().map(|&x| sigmoid(x)).collect()
    }

    pub fn len(&self) -> usize {
        self.logit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logit.is_empty()
    }
}

/// Logits of a pair factor's belief table, in [`BeliefSet::pair`] order.
#[inline]
pub(crate) fn pair_logits(score: f64, inc: [f64; 2]) -> [f64; 4] {
    [0.0, inc[1], inc[0], score + inc[0] + inc[1]]
}

pub(crate) fn softmax4(l: [f64; 4]) -> [f64; 4] {
    let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = l.map(|x| (x - m).exp());
    let z: f64 = e.iter().sum();
    e.map(|x| x / z)
}

/// Total log-odds at each variable: product of all incoming messages.
pub(crate) fn variable_logits(graph: &FactorGraph, msgs: &MessageSet) -> Vec<f64> {
    let first = graph.first_pair();
    (0..graph.num_vars())
        .map(|i| {
            let mut t = msgs.unary[i] + msgs.ptree_to_var[i];
            for &(k, slot) in graph.pair_links(i) {
                t += msgs.pair_to_var[k as usize - first][slot as usize];
            }
            t
        })
        .collect()
}

/// Beliefs at variables and explicit factors from a message set.
pub fn compute_beliefs(graph: &FactorGraph, scores: &[f64], msgs: &MessageSet, ptree: &PtreeState) -> BeliefSet {
    let first = graph.first_pair();
    BeliefSet {
        logit: variable_logits(graph, msgs),
        pair: msgs
            .var_to_pair
            .iter()
            .enumerate()
            .map(|(k, &inc)| softmax4(pair_logits(scores[first + k], inc)))
            .collect(),
        ptree: ptree.log_marginal.iter().map(|x| x.exp()).collect(),
    }
}

/// Messages produced in one iteration, in send order.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub pair_to_var: Vec<[f64; 2]>,
    pub var_to_ptree: Vec<f64>,
    pub ptree: PtreeState,
    pub var_to_pair: Vec<[f64; 2]>,
}

/// Forward record of a BP run, one block per iteration and step.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape {
    pub scores: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
}

impl Tape {
    /// Recomputes the forward pass from the recorded potentials and checks
    /// every recorded value bit for bit.
    pub fn replay(&self, graph: &FactorGraph) -> Result<()> {
        let again = run_bp(graph, &self.scores, self.iterations.len(), true)?
            .tape
            .expect("recording requested");
        for (t, (a, b)) in self.iterations.iter().zip(&again.iterations).enumerate() {
            let same = bits_eq2(&a.pair_to_var, &b.pair_to_var)
                && bits_eq(&a.var_to_ptree, &b.var_to_ptree)
                && bits_eq(&a.ptree.raw, &b.ptree.raw)
                && bits_eq(&a.ptree.outgoing, &b.ptree.outgoing)
                && bits_eq(&a.ptree.log_marginal, &b.ptree.log_marginal)
                && bits_eq(&a.ptree.io.log_beta, &b.ptree.io.log_beta)
                && bits_eq(&a.ptree.io.log_alpha, &b.ptree.io.log_alpha)
                && bits_eq2(&a.var_to_pair, &b.var_to_pair);
            if !same {
                return Err(Error::TapeMismatch(format!("iteration {t} differs on replay")));
            }
        }
        Ok(())
    }

    /// Variable beliefs `b_i(ON)` after each iteration.
    pub fn belief_trace(&self, graph: &FactorGraph) -> Vec<Vec<f64>> {
        let mut msgs = MessageSet::uniform(graph);
        msgs.unary.copy_from_slice(&self.scores[..graph.num_vars()]);
        self.iterations
            .iter()
            .map(|it| {
                msgs.pair_to_var.clone_from(&it.pair_to_var);
                msgs.ptree_to_var.clone_from(&it.ptree.outgoing);
                variable_logits(graph, &msgs).into_iter().map(sigmoid).collect()
            })
            .collect()
    }

    /// Text dump: `iter <t> arc <h> <m> b <v>` per variable and iteration.
    pub fn dump_beliefs<W: Write>(&self, graph: &FactorGraph, out: &mut W) -> io::Result<()> {
        for (t, b) in self.belief_trace(graph).iter().enumerate() {
            for (i, &(h, m)) in graph.arcs().iter().enumerate() {
                writeln!(out, "iter {} arc {} {} b {}", t + 1, h, m, b[i])?;
            }
        }
        Ok(())
    }
}

fn bits_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn bits_eq2(a: &[[f64; 2]], b: &[[f64; 2]]) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b)
            .all(|(x, y)| x[0].to_bits() == y[0].to_bits() && x[1].to_bits() == y[1].to_bits())
}

#[derive(Debug, Clone)]
pub struct BpResult {
    pub beliefs: BeliefSet,
    pub messages: MessageSet,
    /// The PTree pass of the final iteration.
    pub ptree: PtreeState,
    pub tape: Option<Tape>,
}

/// Runs `t_max` iterations of BP given per-factor log-potentials `scores`
/// (indexed like [`FactorGraph::factors`]).
pub fn run_bp(graph: &FactorGraph, scores: &[f64], t_max: usize, record: bool) -> Result<BpResult> {
    if t_max == 0 {
        return Err(Error::InvalidArgument("BP needs at least one iteration".into()));
    }
    if scores.len() != graph.factors().len() {
        return Err(Error::ShapeMismatch {
            expected: graph.factors().len(),
            found: scores.len(),
        });
    }
    let v = graph.num_vars();
    let first = graph.first_pair();
    let factors = graph.factors();
    let mut msgs = MessageSet::uniform(graph);
    msgs.unary.copy_from_slice(&scores[..v]);
    let mut records = Vec::new();
    let mut last = None;

    for _ in 0..t_max {
        for (k, f) in factors[first..].iter().enumerate() {
            let s = scores[first + k];
            let inc = msgs.var_to_pair[k];
            msgs.pair_to_var[k] = [
                send_explicit_factor_message(f.kind, s, inc[1]),
                send_explicit_factor_message(f.kind, s, inc[0]),
            ];
        }
        for i in 0..v {
            let mut t = msgs.unary[i];
            for &(k, slot) in graph.pair_links(i) {
                t += msgs.pair_to_var[k as usize - first][slot as usize];
            }
            msgs.var_to_ptree[i] = t;
        }
        let ptree = send_ptree_messages(graph.chart(), &msgs.var_to_ptree)?;
        msgs.ptree_to_var.copy_from_slice(&ptree.outgoing);
        for i in 0..v {
            let base = msgs.var_to_ptree[i] + msgs.ptree_to_var[i];
            for &(k, slot) in graph.pair_links(i) {
                let k = k as usize - first;
                msgs.var_to_pair[k][slot as usize] = base - msgs.pair_to_var[k][slot as usize];
            }
        }
        if record {
            records.push(IterationRecord {
                pair_to_var: msgs.pair_to_var.clone(),
                var_to_ptree: msgs.var_to_ptree.clone(),
                ptree: ptree.clone(),
                var_to_pair: msgs.var_to_pair.clone(),
            });
        }
        last = Some(ptree);
    }

    let ptree = last.expect("t_max >= 1");
    let beliefs = compute_beliefs(graph, scores, &msgs, &ptree);
    Ok(BpResult {
        beliefs,
        messages: msgs,
        ptree,
        tape: record.then(|| Tape {
            scores: scores.to_vec(),
            iterations: records,
        }),
    })
}
