//! Projective parsing charts (Eisner 1996) as hypergraphs, plus max-sum
//! Viterbi decoding over the same item space.
//!
//! Items are complete (`C`) and incomplete (`I`) spans `[s, t]` with a
//! direction. Right-pointing items have their head at `s`, left-pointing at
//! `t`. ROOT sits at position 0 and may take several children. The final item
//! is the right-pointing complete span `[0, n]`.

use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, HypergraphBuilder, InsideOutside};
use crate::tree::{ArcMask, ProjTree};

const NONE: u32 = u32::MAX;

/// Per-arc weights (or additive scores) with an arc mask.
///
/// Masked arcs are treated as weight 0 (score `-inf` for Viterbi).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeightMatrix {
    n: usize,
    values: Vec<f64>,
    mask: ArcMask,
}

impl EdgeWeightMatrix {
    /// All arcs allowed, every value `fill`.
    pub fn new(n: usize, fill: f64) -> Self {
        EdgeWeightMatrix {
            n,
            values: vec![fill; (n + 1) * (n + 1)],
            mask: ArcMask::full(n),
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut w = Self::new(n, 0.0);
        for h in 0..=n {
            for m in 1..=n {
                if h != m {
                    w.values[h * (n + 1) + m] = f(h, m);
                }
            }
        }
        w
    }

    pub fn with_mask(mut self, mask: ArcMask) -> Self {
        assert_eq!(mask.len(), self.n);
        self.mask = mask;
        self
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, head: usize, dep: usize) -> f64 {
        self.values[head * (self.n + 1) + dep]
    }

    pub fn set(&mut self, head: usize, dep: usize, value: f64) {
        self.values[head * (self.n + 1) + dep] = value;
    }

    pub fn mask(&self) -> &ArcMask {
        &self.mask
    }

    pub fn mask_mut(&mut self) -> &mut ArcMask {
        &mut self.mask
    }
}

/// The Eisner hypergraph for one sentence length and arc mask.
///
/// Arcs are numbered by dependent, then head; this numbering is shared with
/// the factor graph's edge variables.
#[derive(Debug, Clone)]
pub struct EisnerChart {
    n: usize,
    arcs: Vec<(usize, usize)>,
    arc_index: Vec<u32>,
    arc_node: Vec<u32>,
    edge_arc: Vec<u32>,
    hypergraph: Hypergraph,
}

impl EisnerChart {
    pub fn new(mask: &ArcMask) -> Result<Self> {
        let n = mask.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty sentence".into()));
        }
        mask.check_feasible()?;

        let cells = (n + 1) * (n + 1);
        let mut arcs = Vec::new();
        let mut arc_index = vec![NONE; cells];
        for m in 1..=n {
            for h in mask.parents(m) {
                arc_index[h * (n + 1) + m] = arcs.len() as u32;
                arcs.push((h, m));
            }
        }

        let idx = |s: usize, t: usize| s * (n + 1) + t;
        let mut comp_r = vec![NONE; cells];
        let mut comp_l = vec![NONE; cells];
        let mut inc_r = vec![NONE; cells];
        let mut inc_l = vec![NONE; cells];

        let approx_edges = (n + 1) * (n + 1) * (n + 2) * 2 / 3 + 4;
        let mut b = HypergraphBuilder::with_capacity(approx_edges, 2 * approx_edges);
        let mut edge_arc = Vec::with_capacity(approx_edges);
        let mut arc_node = vec![NONE; arcs.len()];

        for s in 0..=n {
            comp_r[idx(s, s)] = b.add_node() as u32;
            if s >= 1 {
                comp_l[idx(s, s)] = b.add_node() as u32;
            }
        }
        let mut pending: Vec<[usize; 2]> = Vec::new();
        let live = |x: u32| x != NONE;
        for width in 1..=n {
            for s in 0..=n - width {
                let t = s + width;
                pending.clear();
                for r in s..t {
                    let (left, right) = (comp_r[idx(s, r)], comp_l[idx(r + 1, t)]);
                    if live(left) && live(right) {
                        pending.push([left as usize, right as usize]);
                    }
                }
                // I[s,t,←] carries arc t → s, I[s,t,→] carries arc s → t.
                for (a, slot) in [
                    (if s >= 1 { arc_index[idx(t, s)] } else { NONE }, &mut inc_l),
                    (arc_index[idx(s, t)], &mut inc_r),
                ] {
                    if a == NONE || pending.is_empty() {
                        continue;
                    }
                    let node = b.add_node();
                    slot[idx(s, t)] = node as u32;
                    arc_node[a as usize] = node as u32;
                    for tails in &pending {
                        b.add_edge(node, tails, 1.0);
                        edge_arc.push(a);
                    }
                }
                // C[s,t,←]: head t
                if s >= 1 {
                    pending.clear();
                    for r in s..t {
                        let (left, inc) = (comp_l[idx(s, r)], inc_l[idx(r, t)]);
                        if live(left) && live(inc) {
                            pending.push([left as usize, inc as usize]);
                        }
                    }
                    if !pending.is_empty() {
                        let node = b.add_node();
                        comp_l[idx(s, t)] = node as u32;
                        for tails in &pending {
                            b.add_edge(node, tails, 1.0);
                            edge_arc.push(NONE);
                        }
                    }
                }
                // C[s,t,→]: head s
                pending.clear();
                for r in s + 1..=t {
                    let (inc, right) = (inc_r[idx(s, r)], comp_r[idx(r, t)]);
                    if live(inc) && live(right) {
                        pending.push([inc as usize, right as usize]);
                    }
                }
                if !pending.is_empty() {
                    let node = b.add_node();
                    comp_r[idx(s, t)] = node as u32;
                    for tails in &pending {
                        b.add_edge(node, tails, 1.0);
                        edge_arc.push(NONE);
                    }
                }
            }
        }

        if !live(comp_r[idx(0, n)]) {
            return Err(Error::DegenerateDistribution);
        }
        let root = comp_r[idx(0, n)] as usize;
        let hypergraph = b.build(root)?;
        Ok(EisnerChart {
            n,
            arcs,
            arc_index,
            arc_node,
            edge_arc,
            hypergraph,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    /// Allowed arcs `(head, dep)` in chart order.
    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn arc_index(&self, head: usize, dep: usize) -> Option<usize> {
        if head > self.n || dep == 0 || dep > self.n {
            return None;
        }
        match self.arc_index[head * (self.n + 1) + dep] {
            NONE => None,
            a => Some(a as usize),
        }
    }

    /// Hypergraph node whose marginal is the marginal of arc `a`; `None` if
    /// the arc is allowed but appears in no projective tree.
    pub fn arc_node(&self, arc: usize) -> Option<usize> {
        match self.arc_node[arc] {
            NONE => None,
            v => Some(v as usize),
        }
    }

    pub fn hypergraph(&self) -> &Hypergraph {
        &self.hypergraph
    }

    /// Arc carried by hyperedge `e`, if any.
    pub fn edge_arc(&self, edge: usize) -> Option<usize> {
        match self.edge_arc[edge] {
            NONE => None,
            a => Some(a as usize),
        }
    }

    /// Expands per-arc log-weights to per-hyperedge log-weights.
    pub fn edge_log_weights(&self, arc_log_weights: &[f64]) -> Vec<f64> {
        self.edge_arc
            .iter()
            .map(|&a| if a == NONE { 0.0 } else { arc_log_weights[a as usize] })
            .collect()
    }

    pub fn inside_outside(&self, arc_log_weights: &[f64]) -> Result<InsideOutside> {
        self.check_arcs(arc_log_weights.len())?;
        self.hypergraph
            .inside_outside_log(&self.edge_log_weights(arc_log_weights))
    }

    pub fn arc_marginals(&self, io: &InsideOutside) -> Vec<f64> {
        self.arc_node
            .iter()
            .map(|&v| if v == NONE { 0.0 } else { io.marginals[v as usize] })
            .collect()
    }

    /// `∂J/∂log w_a` per arc, given `∂J/∂log p(a)` per arc and a direct
    /// seed on the log partition function.
    pub fn backward(
        &self,
        arc_log_weights: &[f64],
        io: &InsideOutside,
        arc_log_marginal_seed: &[f64],
        log_partition_seed: f64,
    ) -> Result<Vec<f64>> {
        self.check_arcs(arc_log_weights.len())?;
        self.check_arcs(arc_log_marginal_seed.len())?;
        let mut node_seed = vec![0.0; self.hypergraph.num_nodes()];
        for (a, &g) in arc_log_marginal_seed.iter().enumerate() {
            if let Some(v) = self.arc_node(a) {
                node_seed[v] = g;
            }
        }
        let edge_adj = self.hypergraph.backward_log(
            &self.edge_log_weights(arc_log_weights),
            io,
            &node_seed,
            log_partition_seed,
        )?;
        let mut out = vec![0.0; self.arcs.len()];
        for (e, &a) in self.edge_arc.iter().enumerate() {
            if a != NONE {
                out[a as usize] += edge_adj[e];
            }
        }
        Ok(out)
    }

    fn check_arcs(&self, found: usize) -> Result<()> {
        if found != self.arcs.len() {
            return Err(Error::ShapeMismatch {
                expected: self.arcs.len(),
                found,
            });
        }
        Ok(())
    }
}

/// Builds the parse hypergraph with the matrix's weights on its hyperedges.
///
/// Returns the hypergraph and, per cell `head * (n + 1) + dep`, the node whose
/// marginal is that arc's marginal (`None` for masked arcs).
pub fn build_parse_hypergraph(weights: &EdgeWeightMatrix) -> Result<(Hypergraph, Vec<Option<usize>>)> {
    let chart = EisnerChart::new(weights.mask())?;
    let n = weights.len();
    let mut hg = chart.hypergraph.clone();
    let edge_weights: Vec<f64> = chart
        .edge_arc
        .iter()
        .map(|&a| {
            if a == NONE {
                1.0
            } else {
                let (h, m) = chart.arcs[a as usize];
                weights.get(h, m)
            }
        })
        .collect();
    hg.set_weights(&edge_weights)?;
    let mut map = vec![None; (n + 1) * (n + 1)];
    for (a, &(h, m)) in chart.arcs.iter().enumerate() {
        map[h * (n + 1) + m] = chart.arc_node(a);
    }
    Ok((hg, map))
}

/// Arc marginals over projective trees plus the log partition function.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcMarginals {
    n: usize,
    values: Vec<f64>,
    pub log_partition: f64,
}

impl ArcMarginals {
    pub fn get(&self, head: usize, dep: usize) -> f64 {
        self.values[head * (self.n + 1) + dep]
    }

    pub fn partition(&self) -> f64 {
        self.log_partition.exp()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Sum-product over projective trees: per-arc marginals and the partition.
pub fn edge_marginals(weights: &EdgeWeightMatrix) -> Result<ArcMarginals> {
    let chart = EisnerChart::new(weights.mask())?;
    let log_w: Vec<f64> = chart
        .arcs
        .iter()
        .map(|&(h, m)| {
            let w = weights.get(h, m);
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidArgument(format!("arc weight {w} for {h}->{m}")));
            }
            Ok(w.ln())
        })
        .collect::<Result<_>>()?;
    let io = chart.inside_outside(&log_w)?;
    let n = weights.len();
    let mut values = vec![0.0; (n + 1) * (n + 1)];
    for (a, p) in chart.arc_marginals(&io).into_iter().enumerate() {
        let (h, m) = chart.arcs[a];
        values[h * (n + 1) + m] = p;
    }
    Ok(ArcMarginals {
        n,
        values,
        log_partition: io.log_partition,
    })
}

/// The projective tree maximizing the sum of its arc scores.
///
/// Ties are broken toward the lowest split point at each chart combination,
/// so repeated calls return the same tree.
pub fn viterbi_tree(scores: &EdgeWeightMatrix) -> Result<ProjTree> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty sentence".into()));
    }
    scores.mask().check_feasible()?;
    let sz = n + 1;
    let idx = |s: usize, t: usize| s * sz + t;
    let neg = f64::NEG_INFINITY;
    let arc = |h: usize, m: usize| {
        if scores.mask().allowed(h, m) {
            scores.get(h, m)
        } else {
            neg
        }
    };

    // [s,t] tables: complete right/left, incomplete right/left, with split backpointers.
    let mut cr = vec![neg; sz * sz];
    let mut cl = vec![neg; sz * sz];
    let mut ir = vec![neg; sz * sz];
    let mut il = vec![neg; sz * sz];
    let mut bcr = vec![0usize; sz * sz];
    let mut bcl = vec![0usize; sz * sz];
    let mut bir = vec![0usize; sz * sz];
    let mut bil = vec![0usize; sz * sz];
    for s in 0..=n {
        cr[idx(s, s)] = 0.0;
        if s >= 1 {
            cl[idx(s, s)] = 0.0;
        }
    }
    for width in 1..=n {
        for s in 0..=n - width {
            let t = s + width;
            let mut best = neg;
            let mut arg = s;
            for r in s..t {
                let v = cr[idx(s, r)] + cl[idx(r + 1, t)];
                if v > best {
                    best = v;
                    arg = r;
                }
            }
            if best > neg {
                let (sr, sl) = (arc(s, t), if s >= 1 { arc(t, s) } else { neg });
                ir[idx(s, t)] = best + sr;
                bir[idx(s, t)] = arg;
                il[idx(s, t)] = best + sl;
                bil[idx(s, t)] = arg;
            }
            if s >= 1 {
                let mut best = neg;
                let mut arg = s;
                for r in s..t {
                    let v = cl[idx(s, r)] + il[idx(r, t)];
                    if v > best {
                        best = v;
                        arg = r;
                    }
                }
                cl[idx(s, t)] = best;
                bcl[idx(s, t)] = arg;
            }
            let mut best = neg;
            let mut arg = s + 1;
            for r in s + 1..=t {
                let v = ir[idx(s, r)] + cr[idx(r, t)];
                if v > best {
                    best = v;
                    arg = r;
                }
            }
            cr[idx(s, t)] = best;
            bcr[idx(s, t)] = arg;
        }
    }
    if !(cr[idx(0, n)] > neg) {
        return Err(Error::DegenerateDistribution);
    }

    #[derive(Clone, Copy)]
    enum Item {
        CompR(usize, usize),
        CompL(usize, usize),
        IncR(usize, usize),
        IncL(usize, usize),
    }
    let mut heads = vec![0usize; n];
    let mut stack = vec![Item::CompR(0, n)];
    while let Some(item) = stack.pop() {
        match item {
            Item::CompR(s, t) if s < t => {
                let r = bcr[idx(s, t)];
                stack.push(Item::IncR(s, r));
                stack.push(Item::CompR(r, t));
            }
            Item::CompL(s, t) if s < t => {
                let r = bcl[idx(s, t)];
                stack.push(Item::CompL(s, r));
                stack.push(Item::IncL(r, t));
            }
            Item::IncR(s, t) => {
                heads[t - 1] = s;
                let r = bir[idx(s, t)];
                stack.push(Item::CompR(s, r));
                stack.push(Item::CompL(r + 1, t));
            }
            Item::IncL(s, t) => {
                heads[s - 1] = t;
                let r = bil[idx(s, t)];
                stack.push(Item::CompR(s, r));
                stack.push(Item::CompL(r + 1, t));
            }
            _ => {}
        }
    }
    ProjTree::new(heads)
}
