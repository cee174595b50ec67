//! Reverse-mode pass over a BP [`Tape`].
//!
//! Each taped step has a hand-written local backward rule; steps are
//! visited in exactly the reverse of their forward order.

use crate::bp::{sigmoid, PtreeState, Tape, MESSAGE_CLAMP};
use crate::eisner::EisnerChart;
use crate::error::{Error, Result};
use crate::factor_graph::FactorGraph;

/// Adjoints of the objective with respect to the quantities it reads
/// directly from a BP run.
#[derive(Debug, Clone, PartialEq)]
pub struct BpSeeds {
    /// `∂J/∂logit b_i(ON)`.
    pub belief_logit: Vec<f64>,
    /// Direct `∂J/∂s_α` per factor.
    pub score: Vec<f64>,
    /// `∂J/∂` final variable → pair-factor messages.
    pub pair_incoming: Vec<[f64; 2]>,
    /// `∂J/∂` final variable → PTree messages.
    pub ptree_incoming: Vec<f64>,
    /// `∂J/∂log p_i` of the final PTree pass.
    pub ptree_log_marginal: Vec<f64>,
    /// `∂J/∂log Z` of the final PTree pass.
    pub ptree_log_partition: f64,
}

impl BpSeeds {
    pub fn zeros(graph: &FactorGraph) -> Self {
        let v = graph.num_vars();
        BpSeeds {
            belief_logit: vec![0.0; v],
            score: vec![0.0; graph.factors().len()],
            pair_incoming: vec![[0.0; 2]; graph.num_pair_factors()],
            ptree_incoming: vec![0.0; v],
            ptree_log_marginal: vec![0.0; v],
            ptree_log_partition: 0.0,
        }
    }

    pub fn scale(&mut self, c: f64) {
        for x in self
            .belief_logit
            .iter_mut()
            .chain(&mut self.score)
            .chain(&mut self.ptree_incoming)
            .chain(&mut self.ptree_log_marginal)
        {
            *x *= c;
        }
        for p in &mut self.pair_incoming {
            p[0] *= c;
            p[1] *= c;
        }
        self.ptree_log_partition *= c;
    }

    fn check(&self, graph: &FactorGraph) -> Result<()> {
        let v = graph.num_vars();
        let shapes = [
            ("belief", self.belief_logit.len(), v),
            ("score", self.score.len(), graph.factors().len()),
            ("pair", self.pair_incoming.len(), graph.num_pair_factors()),
            ("ptree", self.ptree_incoming.len(), v),
            ("marginal", self.ptree_log_marginal.len(), v),
        ];
        for (name, found, expected) in shapes {
            if found != expected {
                return Err(Error::TapeMismatch(format!(
                    "{name} seeds have length {found}, tape has {expected}"
                )));
            }
        }
        Ok(())
    }
}

#[inline]
fn unclamped(raw: f64) -> bool {
    raw > -MESSAGE_CLAMP && raw < MESSAGE_CLAMP
}

/// Pulls adjoints of the outgoing PTree messages back to the incoming ones.
///
/// `out_adj[i]` is `∂J/∂` the clamped outgoing log-odds. `log_marginal_seed`
/// and `log_partition_seed` are extra direct adjoints on the same pass.
pub fn backward_ptree_message(
    chart: &EisnerChart,
    incoming: &[f64],
    state: &PtreeState,
    out_adj: &[f64],
    log_marginal_seed: Option<&[f64]>,
    log_partition_seed: f64,
) -> Result<Vec<f64>> {
    let v = chart.num_arcs();
    if out_adj.len() != v || incoming.len() != v {
        return Err(Error::ShapeMismatch {
            expected: v,
            found: out_adj.len().min(incoming.len()),
        });
    }
    let g: Vec<f64> = (0..v)
        .map(|i| if unclamped(state.raw[i]) { out_adj[i] } else { 0.0 })
        .collect();
    let lp = &state.log_marginal;
    let lq = &state.log_complement;
    let mut seed = match log_marginal_seed {
        Some(s) => s.to_vec(),
        None => vec![0.0; v],
    };
    for (lo, hi) in crate::bp::dependent_blocks(chart) {
        for j in lo..hi {
            let mut acc = g[j];
            if lp[j] > f64::NEG_INFINITY {
                for i in lo..hi {
                    if i != j && g[i] != 0.0 {
                        acc -= g[i] * (lp[j] - lq[i]).exp();
                    }
                }
            }
            seed[j] += acc;
        }
    }
    let mut adj = chart.backward(incoming, &state.io, &seed, log_partition_seed)?;
    for (a, gi) in adj.iter_mut().zip(&g) {
        *a -= gi;
    }
    Ok(adj)
}

/// Returns `∂J/∂s_α` for every factor log-potential.
pub fn backward_pass(graph: &FactorGraph, tape: &Tape, seeds: &BpSeeds) -> Result<Vec<f64>> {
    seeds.check(graph)?;
    if tape.scores.len() != graph.factors().len() || tape.iterations.is_empty() {
        return Err(Error::TapeMismatch("tape does not belong to this graph".into()));
    }
    let v = graph.num_vars();
    let first = graph.first_pair();
    let np = graph.num_pair_factors();
    let scores = &tape.scores;

    let mut a_s = seeds.score.clone();
    let mut a_f2v = vec![[0.0f64; 2]; np];
    let mut a_v2f = seeds.pair_incoming.clone();
    let mut a_v2p = seeds.ptree_incoming.clone();
    let mut a_p2v = vec![0.0; v];

    // Variable beliefs read the unary message (= s_i), the last PTree
    // message and the last pair messages.
    for i in 0..v {
        let g = seeds.belief_logit[i];
        if g == 0.0 {
            continue;
        }
        a_s[i] += g;
        a_p2v[i] += g;
        for &(k, slot) in graph.pair_links(i) {
            a_f2v[k as usize - first][slot as usize] += g;
        }
    }

    let last = tape.iterations.len() - 1;
    for t in (0..=last).rev() {
        let rec = &tape.iterations[t];

        // variables → pair factors
        for i in 0..v {
            let links = graph.pair_links(i);
            let total: f64 = links
                .iter()
                .map(|&(k, slot)| a_v2f[k as usize - first][slot as usize])
                .sum();
            if total != 0.0 {
                a_v2p[i] += total;
                a_p2v[i] += total;
            }
            for &(k, slot) in links {
                let (k, slot) = (k as usize - first, slot as usize);
                a_f2v[k][slot] -= a_v2f[k][slot];
            }
        }
        a_v2f.iter_mut().for_each(|x| *x = [0.0; 2]);

        // PTree → variables
        let (lm, lz) = if t == last {
            (Some(seeds.ptree_log_marginal.as_slice()), seeds.ptree_log_partition)
        } else {
            (None, 0.0)
        };
        let back = backward_ptree_message(graph.chart(), &rec.var_to_ptree, &rec.ptree, &a_p2v, lm, lz)?;
        for (a, b) in a_v2p.iter_mut().zip(&back) {
            *a += b;
        }
        a_p2v.iter_mut().for_each(|x| *x = 0.0);

        // variables → PTree
        for i in 0..v {
            let g = a_v2p[i];
            if g == 0.0 {
                continue;
            }
            a_s[i] += g;
            for &(k, slot) in graph.pair_links(i) {
                a_f2v[k as usize - first][slot as usize] += g;
            }
        }
        a_v2p.iter_mut().for_each(|x| *x = 0.0);

        // pair factors → variables
        for k in 0..np {
            let s = scores[first + k];
            let prev = if t == 0 {
                [0.0; 2]
            } else {
                tape.iterations[t - 1].var_to_pair[k]
            };
            for slot in 0..2 {
                let g = a_f2v[k][slot];
                if g == 0.0 {
                    continue;
                }
                let other = prev[1 - slot];
                let on = sigmoid(s + other);
                a_s[first + k] += g * on;
                if t > 0 {
                    a_v2f[k][1 - slot] += g * (on - sigmoid(other));
                }
            }
            a_f2v[k] = [0.0; 2];
        }
    }
    Ok(a_s)
}
