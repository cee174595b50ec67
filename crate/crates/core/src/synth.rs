//! Seeded synthetic treebanks from a small lexicalized grammar.
//!
//! Sentences have subjects, objects, adjectives, fronted adverbs and
//! prepositional phrases whose attachment depends on the verb, the object
//! noun and the class of the prepositional object. A configurable share of
//! sentences extrapose a subject modifier past the verb, which yields
//! non-projective trees.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conllx::ConllSentence;
use crate::sentence::{AnnotatedSentence, Token};
use crate::tree::DepTree;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub sentences: usize,
    pub seed: u64,
    /// Fixes the lexicon and attachment preferences.
    pub grammar_seed: u64,
    pub nonprojective_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sentences: 100,
            seed: 1,
            grammar_seed: 7,
            nonprojective_rate: 0.03,
        }
    }
}

const NOUN_CLASSES: usize = 3;
const NOUNS: usize = 36;
const VERBS: usize = 16;
const PREPS: usize = 6;

struct Grammar {
    noun_class: Vec<usize>,
    transitive: Vec<bool>,
    verb_aff: Vec<[[f64; NOUN_CLASSES]; PREPS]>,
    noun_aff: Vec<[[f64; NOUN_CLASSES]; PREPS]>,
}

impl Grammar {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = |rng: &mut ChaCha8Rng, k: usize| -> Vec<[[f64; NOUN_CLASSES]; PREPS]> {
            (0..k)
                .map(|_| std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-2.0..2.0))))
                .collect()
        };
        let verb_aff = table(&mut rng, VERBS);
        let noun_aff = table(&mut rng, NOUNS);
        Grammar {
            noun_class: (0..NOUNS).map(|i| i % NOUN_CLASSES).collect(),
            transitive: (0..VERBS).map(|i| i % 4 != 0).collect(),
            verb_aff,
            noun_aff,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    form: String,
    cpos: &'static str,
    pos: &'static str,
    lex: Option<usize>,
    subject: bool,
    left: Vec<Node>,
    right: Vec<Node>,
}

impl Node {
    fn leaf(form: String, cpos: &'static str, pos: &'static str) -> Self {
        Node {
            form,
            cpos,
            pos,
            lex: None,
            subject: false,
            left: Vec::new(),
            right: Vec::new(),
        }
    }
}

struct Gen<'a> {
    g: &'a Grammar,
    rng: ChaCha8Rng,
    nonprojective_rate: f64,
}

impl Gen<'_> {
    fn noun_phrase(&mut self, depth: usize) -> Node {
        let rng = &mut self.rng;
        if depth == 0 && rng.gen_bool(0.2) {
            return Node::leaf(format!("pro{}", rng.gen_range(0..5)), "PRON", "PRP");
        }
        let i = rng.gen_range(0..NOUNS);
        let plural = rng.gen_bool(0.3);
        let mut n = Node::leaf(
            format!("noun{i}{}", if plural { "s" } else { "" }),
            "NOUN",
            if plural { "NNS" } else { "NN" },
        );
        n.lex = Some(i);
        if rng.gen_bool(if plural { 0.5 } else { 0.9 }) {
            n.left.push(Node::leaf(format!("det{}", rng.gen_range(0..4)), "DET", "DT"));
        }
        for _ in 0..[0, 0, 1, 1, 2][rng.gen_range(0..5)] {
            n.left.push(Node::leaf(format!("adj{}", rng.gen_range(0..12)), "ADJ", "JJ"));
        }
        if depth == 0 && self.rng.gen_bool(0.15) {
            self.attach_pps(&mut n, 1, depth + 1);
        }
        n
    }

    fn prep_phrase(&mut self, depth: usize) -> Node {
        let p = self.rng.gen_range(0..PREPS);
        let mut n = Node::leaf(format!("prep{p}"), "ADP", "IN");
        n.lex = Some(p);
        let obj = self.noun_phrase(depth);
        n.right.push(obj);
        n
    }

    /// Appends `count` prepositional phrases at the right edge of `root`,
    /// each attached to the verb or noun on the right spine with the highest
    /// affinity for (preposition, class of its object).
    fn attach_pps(&mut self, root: &mut Node, count: usize, depth: usize) {
        for _ in 0..count {
            let pp = self.prep_phrase(depth);
            let p = pp.lex.expect("preposition index");
            let c = pp.right[0].lex.map_or(0, |i| self.g.noun_class[i]);
            let mut spine = Vec::new();
            let mut path = Vec::new();
            let mut node = &*root;
            loop {
                if let Some(lex) = node.lex {
                    let score = match node.cpos {
                        "VERB" => Some(self.g.verb_aff[lex][p][c]),
                        "NOUN" => Some(self.g.noun_aff[lex][p][c]),
                        _ => None,
                    };
                    if let Some(score) = score {
                        spine.push((path.clone(), score));
                    }
                }
                match node.right.last() {
                    Some(last) => {
                        path.push(node.right.len() - 1);
                        node = last;
                    }
                    None => break,
                }
            }
            let pick = if self.rng.gen_bool(0.03) {
                self.rng.gen_range(0..spine.len())
            } else {
                (0..spine.len())
                    .max_by(|&a, &b| spine[a].1.total_cmp(&spine[b].1))
                    .expect("root is on the spine")
            };
            let mut target = &mut *root;
            for &k in &spine[pick].0 {
                target = &mut target.right[k];
            }
            target.right.push(pp);
        }
    }

    fn clause(&mut self) -> (Node, Option<Node>) {
        let v = self.rng.gen_range(0..VERBS);
        let past = self.rng.gen_bool(0.5);
        let mut verb = Node::leaf(
            format!("verb{v}{}", if past { "ed" } else { "" }),
            "VERB",
            if past { "VBD" } else { "VB" },
        );
        verb.lex = Some(v);
        if self.rng.gen_bool(0.15) {
            verb.left.push(Node::leaf(format!("adv{}", self.rng.gen_range(0..8)), "ADV", "RB"));
            verb.left.push(Node::leaf(",".into(), ".", ","));
        }
        let mut subject = self.noun_phrase(0);
        subject.subject = true;
        let extrapose = subject.lex.is_some() && self.rng.gen_bool(self.nonprojective_rate);
        verb.left.push(subject);
        if self.rng.gen_bool(0.1) {
            verb.left.push(Node::leaf(format!("adv{}", self.rng.gen_range(0..8)), "ADV", "RB"));
        }
        if self.g.transitive[v] {
            let object = self.noun_phrase(1);
            verb.right.push(object);
        }
        let pps = [0, 1, 1, 2, 2, 3][self.rng.gen_range(0..6)];
        self.attach_pps(&mut verb, pps, 1);
        let extraposed = (extrapose && !verb.right.is_empty()).then(|| self.prep_phrase(1));
        (verb, extraposed)
    }
}

struct Linear {
    tokens: Vec<Token>,
    heads: Vec<usize>,
    subject: Option<usize>,
}

fn size(node: &Node) -> usize {
    1 + node.left.iter().chain(&node.right).map(size).sum::<usize>()
}

/// Appends the subtree in order and returns the 1-based position of its head.
fn linearize(node: &Node, head: usize, out: &mut Linear) -> usize {
    let me = out.tokens.len() + 1 + node.left.iter().map(size).sum::<usize>();
    for c in &node.left {
        linearize(c, me, out);
    }
    out.tokens.push(Token::new(node.form.clone(), node.pos).with_cpos(node.cpos));
    out.heads.push(head);
    if node.subject {
        out.subject = Some(me);
    }
    for c in &node.right {
        linearize(c, me, out);
    }
    me
}

fn build(verb: &Node, extraposed: Option<&Node>, period: bool) -> (Vec<Token>, Vec<usize>) {
    let mut out = Linear {
        tokens: Vec::new(),
        heads: Vec::new(),
        subject: None,
    };
    let root = linearize(verb, 0, &mut out);
    if let Some(pp) = extraposed {
        let subject = out.subject.unwrap_or(root);
        linearize(pp, subject, &mut out);
    }
    if period {
        out.tokens.push(Token::new(".", ".").with_cpos("."));
        out.heads.push(root);
    }
    (out.tokens, out.heads)
}

/// Generates `cfg.sentences` sentences.
pub fn generate_treebank(cfg: &SynthConfig) -> Vec<ConllSentence> {
    let grammar = Grammar::new(cfg.grammar_seed);
    let mut gen = Gen {
        g: &grammar,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        nonprojective_rate: cfg.nonprojective_rate,
    };
    (0..cfg.sentences)
        .map(|_| {
            let (verb, extra) = gen.clause();
            let period = gen.rng.gen_bool(0.9);
            let (tokens, heads) = build(&verb, extra.as_ref(), period);
            let sentence = AnnotatedSentence::new(tokens).expect("non-empty");
            let tree = DepTree::new(heads).expect("generated trees are acyclic");
            ConllSentence::from_parts(sentence, tree).expect("aligned")
        })
        .collect()
}
