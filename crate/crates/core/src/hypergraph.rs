//! Weighted B-hypergraphs with inside-outside marginals and their exact
//! reverse-mode adjoints.
//!
//! All recurrences run in log space. Hyperedge weights are accepted either as
//! plain nonnegative reals ([`Hypergraph::inside_outside`]) or directly as
//! log-weights ([`Hypergraph::inside_outside_log`]), which is what the parser
//! uses: message log-odds and annealed belief scores can reach magnitudes
//! where a linear-space chart would over- or underflow.
//!
//! The backward pass follows the usual order: outside adjoints bottom-up,
//! inside adjoints top-down, hyperedge adjoints last. Internally it tracks
//! log-derivatives (`ᾱ_i α_i`, `β̄_j β_j`, `w̄_e w_e`), whose local factors are
//! ratios in `[0, 1]` and therefore finite whenever the forward pass is.

use std::io::{self, Write};

use crate::error::{Error, Result};

/// Running `log Σ exp(x)` with a single `exp` per term.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    pub(crate) const fn new() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// `exp(x)` that maps NaN produced by `-inf - -inf` to zero.
#[inline]
fn ratio(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.exp()
    }
}

/// Incrementally assembles a [`Hypergraph`].
#[derive(Debug, Default, Clone)]
pub struct HypergraphBuilder {
    num_nodes: usize,
    heads: Vec<u32>,
    tail_offsets: Vec<u32>,
    tails: Vec<u32>,
    weights: Vec<f64>,
}

impl HypergraphBuilder {
    pub fn new() -> Self {
        HypergraphBuilder {
            tail_offsets: vec![0],
            ..Default::default()
        }
    }

    pub fn with_capacity(edges: usize, tails: usize) -> Self {
        let mut tail_offsets = Vec::with_capacity(edges + 1);
        tail_offsets.push(0);
        HypergraphBuilder {
            num_nodes: 0,
            heads: Vec::with_capacity(edges),
            tail_offsets,
            tails: Vec::with_capacity(tails),
            weights: Vec::with_capacity(edges),
        }
    }

    pub fn add_node(&mut self) -> usize {
        self.num_nodes += 1;
        self.num_nodes - 1
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.heads.len()
    }

    /// Adds the hyperedge `head ← tails` and returns its index.
    pub fn add_edge(&mut self, head: usize, tails: &[usize], weight: f64) -> usize {
        self.heads.push(head as u32);
        self.tails.extend(tails.iter().map(|&t| t as u32));
        self.tail_offsets.push(self.tails.len() as u32);
        self.weights.push(weight);
        self.heads.len() - 1
    }

    /// Validates the graph and computes its topological order.
    pub fn build(self, root: usize) -> Result<Hypergraph> {
        let n = self.num_nodes;
        if root >= n {
            return Err(Error::InvalidArgument(format!(
                "root {root} out of range for {n} nodes"
            )));
        }
        if let Some(&bad) = self
            .heads
            .iter()
            .chain(self.tails.iter())
            .find(|&&v| v as usize >= n)
        {
            return Err(Error::InvalidArgument(format!("node {bad} out of range")));
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "hyperedge weight {w} is not a nonnegative real"
            )));
        }
        if self.tails.iter().any(|&t| t as usize == root) {
            return Err(Error::InvalidArgument(
                "root must not appear in any tail".to_string(),
            ));
        }

        let (in_offsets, in_edges) = csr(n, self.heads.iter().enumerate().map(|(e, &h)| (h, e)));
        let (out_offsets, out_edges) = csr(
            n,
            self.heads.iter().enumerate().flat_map(|(e, _)| {
                let lo = self.tail_offsets[e] as usize;
                let hi = self.tail_offsets[e + 1] as usize;
                self.tails[lo..hi].iter().map(move |&t| (t, e))
            }),
        );

        // Kahn's algorithm; a node becomes ready once every tail occurrence
        // of every incoming edge has been emitted.
        let mut pending: Vec<u32> = vec![0; n];
        for e in 0..self.heads.len() {
            let arity = self.tail_offsets[e + 1] - self.tail_offsets[e];
            pending[self.heads[e] as usize] += arity;
        }
        let mut topo: Vec<u32> = (0..n as u32).filter(|&i| pending[i as usize] == 0).collect();
        let mut cursor = 0;
        while cursor < topo.len() {
            let v = topo[cursor] as usize;
            cursor += 1;
            for &e in &out_edges[out_offsets[v] as usize..out_offsets[v + 1] as usize] {
                let h = self.heads[e as usize] as usize;
                pending[h] -= 1;
                if pending[h] == 0 {
                    topo.push(h as u32);
                }
            }
        }
        if topo.len() != n {
            return Err(Error::CyclicHypergraph);
        }

        Ok(Hypergraph {
            num_nodes: n,
            root,
            heads: self.heads,
            tail_offsets: self.tail_offsets,
            tails: self.tails,
            weights: self.weights,
            in_offsets,
            in_edges,
            out_offsets,
            out_edges,
            topo,
        })
    }
}

fn csr(n: usize, pairs: impl Iterator<Item = (u32, usize)> + Clone) -> (Vec<u32>, Vec<u32>) {
    let mut offsets = vec![0u32; n + 1];
    for (node, _) in pairs.clone() {
        offsets[node as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut items = vec![0u32; offsets[n] as usize];
    for (node, e) in pairs {
        let slot = &mut fill[node as usize];
        items[*slot as usize] = e as u32;
        *slot += 1;
    }
    (offsets, items)
}

/// An acyclic weighted hypergraph with a designated root.
///
/// Nodes without incoming hyperedges are axioms; their inside score is 1.
#[derive(Debug, Clone)]
pub struct Hypergraph {
    num_nodes: usize,
    root: usize,
    heads: Vec<u32>,
    tail_offsets: Vec<u32>,
    tails: Vec<u32>,
    weights: Vec<f64>,
    in_offsets: Vec<u32>,
    in_edges: Vec<u32>,
    out_offsets: Vec<u32>,
    out_edges: Vec<u32>,
    topo: Vec<u32>,
}

/// Inside, outside and marginal quantities of one hypergraph evaluation.
///
/// Inside and outside scores are kept as logarithms; accessors convert.
#[derive(Debug, Clone, PartialEq)]
pub struct InsideOutside {
    pub log_beta: Vec<f64>,
    pub log_alpha: Vec<f64>,
    pub log_partition: f64,
    pub marginals: Vec<f64>,
}

impl InsideOutside {
    pub fn beta(&self, node: usize) -> f64 {
        self.log_beta[node].exp()
    }

    pub fn alpha(&self, node: usize) -> f64 {
        self.log_alpha[node].exp()
    }

    pub fn marginal(&self, node: usize) -> f64 {
        self.marginals[node]
    }

    pub fn partition(&self) -> f64 {
        self.log_partition.exp()
    }
}

/// Adjoints produced by [`Hypergraph::backward`], all in real space:
/// `weight[e] = ∂J/∂w_e`, `alpha[i] = ∂J/∂α_i`, `beta[j] = ∂J/∂β_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypergraphAdjoints {
    pub weight: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Hypergraph {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.heads.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn head(&self, edge: usize) -> usize {
        self.heads[edge] as usize
    }

    pub fn tails(&self, edge: usize) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.tail_slice(edge).iter().map(|&t| t as usize)
    }

    #[inline]
    fn tail_slice(&self, edge: usize) -> &[u32] {
        &self.tails[self.tail_offsets[edge] as usize..self.tail_offsets[edge + 1] as usize]
    }

    pub fn weight(&self, edge: usize) -> f64 {
        self.weights[edge]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Replaces all hyperedge weights, keeping the structure.
    pub fn set_weights(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.weights.len() {
            return Err(Error::ShapeMismatch {
                expected: self.weights.len(),
                found: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "hyperedge weight {w} is not a nonnegative real"
            )));
        }
        self.weights.copy_from_slice(weights);
        Ok(())
    }

    pub fn incoming(&self, node: usize) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.in_edge_slice(node).iter().map(|&e| e as usize)
    }

    #[inline]
    fn in_edge_slice(&self, node: usize) -> &[u32] {
        &self.in_edges[self.in_offsets[node] as usize..self.in_offsets[node + 1] as usize]
    }

    pub fn outgoing(&self, node: usize) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.out_edges[self.out_offsets[node] as usize..self.out_offsets[node + 1] as usize]
            .iter()
            .map(|&e| e as usize)
    }

    pub fn is_axiom(&self, node: usize) -> bool {
        self.in_offsets[node] == self.in_offsets[node + 1]
    }

    /// Nodes in an order where every tail precedes its head.
    pub fn topological_order(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.topo.iter().map(|&v| v as usize)
    }

    fn log_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.ln()).collect()
    }

    /// Inside-outside under the stored weights.
    pub fn inside_outside(&self) -> Result<InsideOutside> {
        self.inside_outside_log(&self.log_weights())
    }

    /// Inside-outside with the given per-edge log-weights (`-inf` = weight 0).
    pub fn inside_outside_log(&self, log_weights: &[f64]) -> Result<InsideOutside> {
        self.check_len(log_weights.len(), self.num_edges())?;
        let n = self.num_nodes;

        let mut log_beta = vec![f64::NEG_INFINITY; n];
        for &v in &self.topo {
            let v = v as usize;
            if self.is_axiom(v) {
                log_beta[v] = 0.0;
                continue;
            }
            let mut acc = LogSum::new();
            for &e in self.in_edge_slice(v) {
                let e = e as usize;
                let mut x = log_weights[e];
                for &t in self.tail_slice(e) {
                    x += log_beta[t as usize];
                }
                acc.add(x);
            }
            log_beta[v] = acc.value();
        }

        let log_partition = log_beta[self.root];
        if log_partition == f64::NEG_INFINITY {
            return Err(Error::DegenerateDistribution);
        }

        let mut acc = vec![LogSum::new(); n];
        let mut log_alpha = vec![f64::NEG_INFINITY; n];
        for &h in self.topo.iter().rev() {
            let h = h as usize;
            let la = if h == self.root { 0.0 } else { acc[h].value() };
            log_alpha[h] = la;
            if la == f64::NEG_INFINITY {
                continue;
            }
            for &e in self.in_edge_slice(h) {
                let e = e as usize;
                let base = log_weights[e] + la;
                if base == f64::NEG_INFINITY {
                    continue;
                }
                let tails = self.tail_slice(e);
                match tails {
                    [t] => acc[*t as usize].add(base),
                    [a, b] => {
                        acc[*a as usize].add(base + log_beta[*b as usize]);
                        acc[*b as usize].add(base + log_beta[*a as usize]);
                    }
                    _ => {
                        for (p, &t) in tails.iter().enumerate() {
                            let others: f64 = tails
                                .iter()
                                .enumerate()
                                .filter(|&(q, _)| q != p)
                                .map(|(_, &k)| log_beta[k as usize])
                                .sum();
                            acc[t as usize].add(base + others);
                        }
                    }
                }
            }
        }

        let marginals = log_alpha
            .iter()
            .zip(&log_beta)
            .map(|(&a, &b)| ratio(a + b - log_partition))
            .collect();

        Ok(InsideOutside {
            log_beta,
            log_alpha,
            log_partition,
            marginals,
        })
    }

    /// Reverse-mode pass: given `seed[i] = ∂J/∂p_w(i)`, returns `∂J/∂w_e`
    /// together with the intermediate adjoints. Outside adjoints are swept
    /// bottom-up, then inside adjoints top-down.
    ///
    /// Works in real space, so it is exact for zero-weight edges but can
    /// underflow on very deep charts; see [`Hypergraph::backward_log`].
    pub fn backward(&self, fwd: &InsideOutside, seed: &[f64]) -> Result<HypergraphAdjoints> {
        self.check_len(seed.len(), self.num_nodes)?;
        self.check_len(fwd.log_beta.len(), self.num_nodes)?;
        let z = fwd.partition();
        let beta: Vec<f64> = fwd.log_beta.iter().map(|x| x.exp()).collect();
        let alpha: Vec<f64> = fwd.log_alpha.iter().map(|x| x.exp()).collect();
        let w = &self.weights;

        let mut adj_alpha: Vec<f64> = (0..self.num_nodes).map(|i| seed[i] * beta[i] / z).collect();
        let mut adj_beta: Vec<f64> = (0..self.num_nodes).map(|i| seed[i] * alpha[i] / z).collect();
        let adj_z: f64 = -(0..self.num_nodes)
            .map(|i| seed[i] * fwd.marginals[i])
            .sum::<f64>()
            / z;
        let mut adj_weight = vec![0.0; self.num_edges()];

        let others = |tails: &[u32], skip: &[usize]| -> f64 {
            tails
                .iter()
                .enumerate()
                .filter(|(q, _)| !skip.contains(q))
                .map(|(_, &k)| beta[k as usize])
                .product()
        };

        for &v in &self.topo {
            let v = v as usize;
            for &e in self.in_edge_slice(v) {
                let e = e as usize;
                match *self.tail_slice(e) {
                    [] => {}
                    [t] => {
                        let g = adj_alpha[t as usize];
                        if g != 0.0 {
                            if v != self.root {
                                adj_alpha[v] += g * w[e];
                            }
                            adj_weight[e] += g * alpha[v];
                        }
                    }
                    [a, b] => {
                        let (a, b) = (a as usize, b as usize);
                        let (ga, gb) = (adj_alpha[a], adj_alpha[b]);
                        if ga == 0.0 && gb == 0.0 {
                            continue;
                        }
                        let up = ga * beta[b] + gb * beta[a];
                        if v != self.root {
                            adj_alpha[v] += w[e] * up;
                        }
                        adj_weight[e] += alpha[v] * up;
                        let wa = w[e] * alpha[v];
                        adj_beta[a] += gb * wa;
                        adj_beta[b] += ga * wa;
                    }
                    ref tails => {
                        for (p, &t) in tails.iter().enumerate() {
                            let g = adj_alpha[t as usize];
                            if g == 0.0 {
                                continue;
                            }
                            let rest = others(tails, &[p]);
                            if v != self.root {
                                adj_alpha[v] += g * w[e] * rest;
                            }
                            adj_weight[e] += g * alpha[v] * rest;
                            for (q, &k) in tails.iter().enumerate() {
                                if q != p {
                                    adj_beta[k as usize] += g * w[e] * alpha[v] * others(tails, &[p, q]);
                                }
                            }
                        }
                    }
                }
            }
        }

        adj_beta[self.root] += adj_z;
        for &h in self.topo.iter().rev() {
            let h = h as usize;
            let g = adj_beta[h];
            if g == 0.0 {
                continue;
            }
            for &e in self.in_edge_slice(h) {
                let e = e as usize;
                match *self.tail_slice(e) {
                    [] => adj_weight[e] += g,
                    [t] => {
                        adj_weight[e] += g * beta[t as usize];
                        adj_beta[t as usize] += g * w[e];
                    }
                    [a, b] => {
                        let (a, b) = (a as usize, b as usize);
                        adj_weight[e] += g * beta[a] * beta[b];
                        adj_beta[a] += g * w[e] * beta[b];
                        adj_beta[b] += g * w[e] * beta[a];
                    }
                    ref tails => {
                        adj_weight[e] += g * others(tails, &[]);
                        for (p, &t) in tails.iter().enumerate() {
                            adj_beta[t as usize] += g * w[e] * others(tails, &[p]);
                        }
                    }
                }
            }
        }

        Ok(HypergraphAdjoints {
            weight: adj_weight,
            alpha: adj_alpha,
            beta: adj_beta,
        })
    }

    /// Log-space backward pass.
    ///
    /// `log_marginal_seed[i]` is `∂J/∂log p_w(i)` and `log_partition_seed` is
    /// `∂J/∂log β_root` (as a direct dependency). Returns `∂J/∂log w_e`.
    pub fn backward_log(
        &self,
        log_weights: &[f64],
        fwd: &InsideOutside,
        log_marginal_seed: &[f64],
        log_partition_seed: f64,
    ) -> Result<Vec<f64>> {
        self.check_len(log_weights.len(), self.num_edges())?;
        self.check_len(log_marginal_seed.len(), self.num_nodes)?;
        self.check_len(fwd.log_beta.len(), self.num_nodes)?;
        Ok(self
            .backward_parts(log_weights, fwd, log_marginal_seed, log_partition_seed)
            .2)
    }

    fn backward_parts(
        &self,
        log_weights: &[f64],
        fwd: &InsideOutside,
        g: &[f64],
        log_partition_seed: f64,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.num_nodes;
        let lb = &fwd.log_beta;
        let la = &fwd.log_alpha;

        // Outside adjoints, bottom-up. `share[slot]` is the fraction of
        // α_t contributed by (edge, tail slot).
        let mut share = vec![0.0; self.tails.len()];
        let mut via_tails = vec![0.0; self.num_edges()];
        let mut adj_alpha = g.to_vec();
        adj_alpha[self.root] = 0.0;
        for &v in &self.topo {
            let v = v as usize;
            let mut total = 0.0;
            for &e in self.in_edge_slice(v) {
                let e = e as usize;
                let lo = self.tail_offsets[e] as usize;
                let tails = self.tail_slice(e);
                let base = log_weights[e] + la[v];
                let mut sum = 0.0;
                match tails {
                    [t] => {
                        let t = *t as usize;
                        let r = ratio(base - la[t]);
                        share[lo] = r;
                        sum += adj_alpha[t] * r;
                    }
                    [a, b] => {
                        let (a, b) = (*a as usize, *b as usize);
                        let ra = ratio(base + lb[b] - la[a]);
                        let rb = ratio(base + lb[a] - la[b]);
                        share[lo] = ra;
                        share[lo + 1] = rb;
                        sum += adj_alpha[a] * ra + adj_alpha[b] * rb;
                    }
                    _ => {
                        for (p, &t) in tails.iter().enumerate() {
                            let others: f64 = tails
                                .iter()
                                .enumerate()
                                .filter(|&(q, _)| q != p)
                                .map(|(_, &k)| lb[k as usize])
                                .sum();
                            let r = ratio(base + others - la[t as usize]);
                            share[lo + p] = r;
                            sum += adj_alpha[t as usize] * r;
                        }
                    }
                }
                if base == f64::NEG_INFINITY {
                    sum = 0.0;
                    share[lo..lo + tails.len()].fill(0.0);
                }
                via_tails[e] = sum;
                total += sum;
            }
            if v != self.root {
                adj_alpha[v] += total;
            }
        }

        // Inside adjoints, top-down.
        let mut adj_beta = g.to_vec();
        adj_beta[self.root] = log_partition_seed
            - g.iter()
                .enumerate()
                .filter(|&(i, _)| i != self.root)
                .map(|(_, s)| s)
                .sum::<f64>();
        let mut adj_weight = vec![0.0; self.num_edges()];
        for &h in self.topo.iter().rev() {
            let h = h as usize;
            let bh = adj_beta[h];
            for &e in self.in_edge_slice(h) {
                let e = e as usize;
                let lo = self.tail_offsets[e] as usize;
                let tails = self.tail_slice(e);
                let mut x = log_weights[e] - lb[h];
                for &t in tails {
                    x += lb[t as usize];
                }
                let s = ratio(x) * bh;
                adj_weight[e] = s + via_tails[e];
                match tails {
                    [t] => adj_beta[*t as usize] += s,
                    [a, b] => {
                        let (a, b) = (*a as usize, *b as usize);
                        adj_beta[a] += s + adj_alpha[b] * share[lo + 1];
                        adj_beta[b] += s + adj_alpha[a] * share[lo];
                    }
                    _ => {
                        for (p, &t) in tails.iter().enumerate() {
                            let others: f64 = tails
                                .iter()
                                .enumerate()
                                .filter(|&(q, _)| q != p)
                                .map(|(q, &k)| adj_alpha[k as usize] * share[lo + q])
                                .sum();
                            adj_beta[t as usize] += s + others;
                        }
                    }
                }
            }
        }
        debug_assert_eq!(adj_alpha.len(), n);
        (adj_alpha, adj_beta, adj_weight)
    }

    fn check_len(&self, found: usize, expected: usize) -> Result<()> {
        if found != expected {
            return Err(Error::ShapeMismatch { expected, found });
        }
        Ok(())
    }

    /// Writes the text debug dump: one `node` line per node followed by one
    /// `edge` line per hyperedge.
    pub fn dump<W: Write>(&self, fwd: &InsideOutside, out: &mut W) -> io::Result<()> {
        for i in 0..self.num_nodes {
            writeln!(
                out,
                "node {} beta {} alpha {} p {}",
                i,
                fwd.beta(i),
                fwd.alpha(i),
                fwd.marginal(i)
            )?;
        }
        for e in 0..self.num_edges() {
            write!(out, "edge {} <-", self.head(e))?;
            for t in self.tails(e) {
                write!(out, " {t}")?;
            }
            writeln!(out, " w {}", self.weights[e])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_derivations(w1: f64, w2: f64) -> Hypergraph {
        let mut b = HypergraphBuilder::new();
        let a = b.add_node();
        let bb = b.add_node();
        let c = b.add_node();
        b.add_edge(c, &[a], w1);
        b.add_edge(c, &[bb], w2);
        b.build(c).unwrap()
    }

    #[test]
    fn single_axiom_root() {
        let mut b = HypergraphBuilder::new();
        let r = b.add_node();
        let hg = b.build(r).unwrap();
        let io = hg.inside_outside().unwrap();
        assert_eq!(io.partition(), 1.0);
        assert_eq!(io.marginal(r), 1.0);
    }

    #[test]
    fn two_derivation_marginals() {
        let hg = two_derivations(2.0, 3.0);
        let io = hg.inside_outside().unwrap();
        assert_relative_eq!(io.partition(), 5.0, max_relative = 1e-14);
        assert_relative_eq!(io.marginal(0), 0.4, max_relative = 1e-14);
        assert_relative_eq!(io.marginal(1), 0.6, max_relative = 1e-14);
        assert_relative_eq!(io.marginal(2), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_root_weight_is_degenerate() {
        let hg = two_derivations(0.0, 0.0);
        assert!(matches!(
            hg.inside_outside(),
            Err(Error::DegenerateDistribution)
        ));
    }

    #[test]
    fn cycle_is_rejected() {
        let mut b = HypergraphBuilder::new();
        let x = b.add_node();
        let y = b.add_node();
        let r = b.add_node();
        b.add_edge(x, &[y], 1.0);
        b.add_edge(y, &[x], 1.0);
        b.add_edge(r, &[x], 1.0);
        assert!(matches!(b.build(r), Err(Error::CyclicHypergraph)));
    }

    #[test]
    fn backward_closed_form() {
        let hg = two_derivations(2.0, 3.0);
        let io = hg.inside_outside().unwrap();
        let adj = hg.backward(&io, &[1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(adj.weight[0], 0.12, max_relative = 1e-12);
        assert_relative_eq!(adj.weight[1], -0.08, max_relative = 1e-12);
    }

    #[test]
    fn backward_zero_seed_is_zero() {
        let hg = two_derivations(2.0, 3.0);
        let io = hg.inside_outside().unwrap();
        let adj = hg.backward(&io, &[0.0; 3]).unwrap();
        assert!(adj.weight.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn backward_rejects_bad_seed() {
        let hg = two_derivations(2.0, 3.0);
        let io = hg.inside_outside().unwrap();
        assert!(matches!(
            hg.backward(&io, &[1.0]),
            Err(Error::ShapeMismatch { expected: 3, found: 1 })
        ));
    }

    #[test]
    fn zero_weight_edge_has_real_adjoint() {
        // p(A) = w1 / (w1 + w2); at w1 = 0 the derivative is 1 / w2.
        let hg = two_derivations(0.0, 4.0);
        let io = hg.inside_outside().unwrap();
        let adj = hg.backward(&io, &[1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(adj.weight[0], 0.25, max_relative = 1e-12);
        assert_relative_eq!(adj.weight[1], 0.0);
    }

    #[test]
    fn binary_edges_match_hand_computation() {
        // root <- [x, y] (w=2), root <- [z] (w=1); x <- [a] (w=3)
        let mut b = HypergraphBuilder::new();
        let a = b.add_node();
        let y = b.add_node();
        let z = b.add_node();
        let x = b.add_node();
        let r = b.add_node();
        b.add_edge(x, &[a], 3.0);
        b.add_edge(r, &[x, y], 2.0);
        b.add_edge(r, &[z], 1.0);
        let hg = b.build(r).unwrap();
        let io = hg.inside_outside().unwrap();
        assert_relative_eq!(io.partition(), 7.0, max_relative = 1e-14);
        assert_relative_eq!(io.marginal(x), 6.0 / 7.0, max_relative = 1e-14);
        assert_relative_eq!(io.marginal(a), 6.0 / 7.0, max_relative = 1e-14);
        assert_relative_eq!(io.marginal(z), 1.0 / 7.0, max_relative = 1e-14);
    }

    #[test]
    fn dump_format() {
        let hg = two_derivations(2.0, 3.0);
        let io = hg.inside_outside().unwrap();
        let mut buf = Vec::new();
        hg.dump(&io, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("node 0 beta 1 alpha 2"));
        assert_eq!(lines[3], "edge 2 <- 0 w 2");
        assert_eq!(lines[4], "edge 2 <- 1 w 3");
    }
}
