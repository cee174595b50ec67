//! Hashed feature templates for arc, grandparent and sibling factors.
//!
//! Every template id is mixed into the hash together with its atoms, so
//! templates live in separate namespaces of the same `2^bits` space. Each
//! template that reads a tag is emitted twice, once with fine and once with
//! coarse tags.

use crate::error::{Error, Result};
use crate::sentence::AnnotatedSentence;

pub const DEFAULT_HASH_BITS: u32 = 20;
pub const MAX_HASH_BITS: u32 = 25;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv_extend(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    fnv_extend(FNV_OFFSET, bytes)
}

fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mask(bits: u32) -> u64 {
    (1u64 << bits) - 1
}

/// Bucket of a string feature under template `template`.
pub fn hash_index(template: u32, feature: &str, bits: u32) -> usize {
    let h = fnv_extend(fnv_extend(FNV_OFFSET, &template.to_le_bytes()), feature.as_bytes());
    (finalize(h) & mask(bits)) as usize
}

fn combine(template: u32, atoms: &[u64], bits: u32) -> u32 {
    let mut h = fnv_extend(FNV_OFFSET, &template.to_le_bytes());
    for a in atoms {
        h = fnv_extend(h, &a.to_le_bytes());
    }
    (finalize(h) & mask(bits)) as u32
}

/// Sorted `(index, count)` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HashedFeatureVector {
    entries: Vec<(u32, f64)>,
}

impl HashedFeatureVector {
    pub fn from_indices(mut idx: Vec<u32>) -> Self {
        idx.sort_unstable();
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(idx.len());
        for i in idx {
            match entries.last_mut() {
                Some((j, c)) if *j == i => *c += 1.0,
                _ => entries.push((i, 1.0)),
            }
        }
        HashedFeatureVector { entries }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, theta: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, c)| theta[i as usize] * c).sum()
    }

    /// `out += scale * self`.
    pub fn add_scaled_to(&self, out: &mut [f64], scale: f64) {
        for &(i, c) in &self.entries {
            out[i as usize] += scale * c;
        }
    }
}

/// Which part a feature vector describes. Positions are sentence indices
/// with ROOT = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorDescriptor {
    Arc { head: usize, dep: usize },
    Grand { grand: usize, head: usize, dep: usize },
    Sib { head: usize, dep: usize, sib: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSet {
    /// Full first- and second-order templates.
    Full,
    /// Unigram and distance templates for the first-order pruner.
    Pruner,
}

/// Precomputed atom hashes, indexed by position + 1 so that positions
/// `-1..=n+1` (boundaries and ROOT included) are addressable.
#[derive(Debug, Clone)]
pub struct SentenceAtoms {
    n: usize,
    form: Vec<u64>,
    pos: Vec<u64>,
    cpos: Vec<u64>,
}

impl SentenceAtoms {
    pub fn new(s: &AnnotatedSentence) -> Self {
        let n = s.len();
        let atom = |x: &str| fnv1a64(x.as_bytes());
        let mut form = Vec::with_capacity(n + 3);
        let mut pos = Vec::with_capacity(n + 3);
        let mut cpos = Vec::with_capacity(n + 3);
        for sym in ["<s>", "<root>"] {
            form.push(atom(sym));
            pos.push(atom(sym));
            cpos.push(atom(sym));
        }
        for t in s.tokens() {
            form.push(atom(&t.form));
            pos.push(atom(&t.pos));
            cpos.push(atom(t.coarse()));
        }
        form.push(atom("</s>"));
        pos.push(atom("</s>"));
        cpos.push(atom("</s>"));
        SentenceAtoms { n, form, pos, cpos }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn get(&self, field: Field, coarse: bool, p: isize) -> u64 {
        let i = (p + 1) as usize;
        match field {
            Field::Form => self.form[i],
            Field::Tag if coarse => self.cpos[i],
            Field::Tag => self.pos[i],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Form,
    Tag,
}

#[derive(Debug, Clone, Copy)]
enum Role {
    H,
    M,
    G,
    S,
    HPrev,
    HNext,
    MPrev,
    MNext,
}

type Atom = (Role, Field);

use Field::{Form as F, Tag as T};
use Role::*;

const ARC_TEMPLATES: &[&[Atom]] = &[
    &[(H, F)],
    &[(H, T)],
    &[(H, F), (H, T)],
    &[(M, F)],
    &[(M, T)],
    &[(M, F), (M, T)],
    &[(H, F), (H, T), (M, F), (M, T)],
    &[(H, T), (M, F), (M, T)],
    &[(H, F), (M, F), (M, T)],
    &[(H, F), (H, T), (M, T)],
    &[(H, F), (H, T), (M, F)],
    &[(H, F), (M, F)],
    &[(H, T), (M, T)],
    &[(H, T), (HNext, T), (MPrev, T), (M, T)],
    &[(HPrev, T), (H, T), (MPrev, T), (M, T)],
    &[(H, T), (HNext, T), (M, T), (MNext, T)],
    &[(HPrev, T), (H, T), (M, T), (MNext, T)],
];

const PRUNER_TEMPLATES: &[&[Atom]] = &[
    &[(H, F)],
    &[(H, T)],
    &[(H, F), (H, T)],
    &[(M, F)],
    &[(M, T)],
    &[(M, F), (M, T)],
];

const GRAND_TEMPLATES: &[&[Atom]] = &[
    &[],
    &[(G, T), (H, T), (M, T)],
    &[(G, F), (H, T), (M, T)],
    &[(G, T), (H, F), (M, T)],
    &[(G, T), (H, T), (M, F)],
    &[(G, T), (M, T)],
    &[(G, F), (M, F)],
    &[(G, F), (M, T)],
    &[(G, T), (M, F)],
];

const SIB_TEMPLATES: &[&[Atom]] = &[
    &[],
    &[(H, T), (M, T), (S, T)],
    &[(H, F), (M, T), (S, T)],
    &[(H, T), (M, F), (S, T)],
    &[(H, T), (M, T), (S, F)],
    &[(M, T), (S, T)],
    &[(M, F), (S, F)],
    &[(M, F), (S, T)],
    &[(M, T), (S, F)],
];

const NS_ARC: u32 = 1 << 16;
const NS_PRUNER: u32 = 2 << 16;
const NS_GRAND: u32 = 3 << 16;
const NS_SIB: u32 = 4 << 16;
const NS_BETWEEN: u32 = 5 << 16;
const NS_BIAS: u32 = 6 << 16;
const COARSE: u32 = 1 << 8;
const WITH_DIST: u32 = 1 << 9;

/// Signed distance bin: 1..=5, 6 (for 6–10), 11 (for 11+), negative for
/// leftward arcs.
pub fn distance_bin(head: usize, dep: usize) -> i64 {
    let d = dep as i64 - head as i64;
    let a = d.abs();
    let b = match a {
        0..=5 => a,
        6..=10 => 6,
        _ => 11,
    };
    b * d.signum()
}

fn direction(from: usize, to: usize) -> u64 {
    (to > from) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureExtractor {
    bits: u32,
    set: FeatureSet,
}

impl FeatureExtractor {
    pub fn new(bits: u32, set: FeatureSet) -> Result<Self> {
        if bits == 0 || bits > MAX_HASH_BITS {
            return Err(Error::InvalidArgument(format!(
                "hash bits must be in 1..={MAX_HASH_BITS}, got {bits}"
            )));
        }
        Ok(FeatureExtractor { bits, set })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn dim(&self) -> usize {
        1 << self.bits
    }

    pub fn feature_set(&self) -> FeatureSet {
        self.set
    }

    pub fn extract(&self, atoms: &SentenceAtoms, desc: FactorDescriptor) -> HashedFeatureVector {
        let mut out = Vec::with_capacity(96);
        self.extract_into(atoms, desc, &mut out);
        HashedFeatureVector::from_indices(out)
    }

    /// Appends raw (unsorted, possibly repeated) indices to `out`.
    pub fn extract_into(&self, atoms: &SentenceAtoms, desc: FactorDescriptor, out: &mut Vec<u32>) {
        match desc {
            FactorDescriptor::Arc { head, dep } => self.arc(atoms, head, dep, out),
            FactorDescriptor::Grand { grand, head, dep } => {
                let dirs = direction(grand, head) << 1 | direction(head, dep);
                let roles = Roles { h: head, m: dep, g: grand, s: 0 };
                self.emit_all(atoms, NS_GRAND, GRAND_TEMPLATES, &roles, Some(dirs), false, out);
            }
            FactorDescriptor::Sib { head, dep, sib } => {
                let dirs = direction(head, dep) << 1 | direction(head, sib);
                let roles = Roles { h: head, m: dep, g: 0, s: sib };
                self.emit_all(atoms, NS_SIB, SIB_TEMPLATES, &roles, Some(dirs), false, out);
            }
        }
    }

    fn arc(&self, atoms: &SentenceAtoms, head: usize, dep: usize, out: &mut Vec<u32>) {
        let dist = distance_bin(head, dep) as u64;
        let roles = Roles { h: head, m: dep, g: 0, s: 0 };
        out.push(combine(NS_BIAS, &[dist], self.bits));
        let (ns, templates) = match self.set {
            FeatureSet::Full => (NS_ARC, ARC_TEMPLATES),
            FeatureSet::Pruner => (NS_PRUNER, PRUNER_TEMPLATES),
        };
        self.emit_all(atoms, ns, templates, &roles, None, false, out);
        self.emit_all(atoms, ns, templates, &roles, Some(dist), true, out);
        if self.set == FeatureSet::Full {
            self.between(atoms, head, dep, dist, out);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn emit_all(
        &self,
        atoms: &SentenceAtoms,
        ns: u32,
        templates: &[&[Atom]],
        roles: &Roles,
        extra: Option<u64>,
        dist_flag: bool,
        out: &mut Vec<u32>,
    ) {
        let mut buf: Vec<u64> = Vec::with_capacity(6);
        for (id, tpl) in templates.iter().enumerate() {
            let has_tag = tpl.iter().any(|&(_, f)| f == Field::Tag);
            for coarse in [false, true] {
                if coarse && !has_tag {
                    continue;
                }
                buf.clear();
                for &(role, field) in tpl.iter() {
                    buf.push(atoms.get(field, coarse, roles.position(role)));
                }
                if let Some(x) = extra {
                    buf.push(x);
                }
                let mut t = ns | id as u32;
                if coarse {
                    t |= COARSE;
                }
                if dist_flag {
                    t |= WITH_DIST;
                }
                out.push(combine(t, &buf, self.bits));
            }
        }
    }

    fn between(&self, atoms: &SentenceAtoms, head: usize, dep: usize, dist: u64, out: &mut Vec<u32>) {
        let (lo, hi) = if head < dep { (head, dep) } else { (dep, head) };
        if hi - lo < 2 {
            return;
        }
        for coarse in [false, true] {
            let mut seen: Vec<u64> = (lo + 1..hi)
                .map(|b| atoms.get(Field::Tag, coarse, b as isize))
                .collect();
            seen.sort_unstable();
            seen.dedup();
            let hp = atoms.get(Field::Tag, coarse, head as isize);
            let mp = atoms.get(Field::Tag, coarse, dep as isize);
            let t = NS_BETWEEN | if coarse { COARSE } else { 0 };
            for b in seen {
                out.push(combine(t, &[hp, b, mp], self.bits));
                out.push(combine(t | WITH_DIST, &[hp, b, mp, dist], self.bits));
            }
        }
    }
}

struct Roles {
    h: usize,
    m: usize,
    g: usize,
    s: usize,
}

impl Roles {
    fn position(&self, r: Role) -> isize {
        match r {
            H => self.h as isize,
            M => self.m as isize,
            G => self.g as isize,
            S => self.s as isize,
            HPrev => self.h as isize - 1,
            HNext => self.h as isize + 1,
            MPrev => self.m as isize - 1,
            MNext => self.m as isize + 1,
        }
    }
}

/// Number of arc features emitted regardless of the in-between template.
pub fn fixed_arc_feature_count(set: FeatureSet) -> usize {
    let templates = match set {
        FeatureSet::Full => ARC_TEMPLATES,
        FeatureSet::Pruner => PRUNER_TEMPLATES,
    };
    let per_pass: usize = templates
        .iter()
        .map(|t| if t.iter().any(|&(_, f)| f == Field::Tag) { 2 } else { 1 })
        .sum();
    1 + 2 * per_pass
}
