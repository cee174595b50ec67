//! CoNLL-X reading and writing, projectivization, splitting and UAS.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use crate::eisner::{viterbi_tree, EdgeWeightMatrix};
use crate::error::{Error, Result};
use crate::sentence::{AnnotatedSentence, Token};
use crate::tree::{DepTree, ProjTree};

const COLUMNS: usize = 10;
const HEAD: usize = 6;
const DEPREL: usize = 7;

/// One sentence with every input column kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConllSentence {
    columns: Vec<[String; COLUMNS]>,
    pub sentence: AnnotatedSentence,
    pub tree: DepTree,
}

fn absent(x: &str) -> bool {
    x == "_"
}

impl ConllSentence {
    /// Builds a sentence from bare tokens and heads; unmodeled columns are `_`.
    pub fn from_parts(sentence: AnnotatedSentence, tree: DepTree) -> Result<Self> {
        if sentence.len() != tree.len() {
            return Err(Error::LengthMismatch {
                left: sentence.len(),
                right: tree.len(),
            });
        }
        let columns = sentence
            .tokens()
            .iter()
            .enumerate()
            .map(|(i, t)| {
                [
                    (i + 1).to_string(),
                    t.form.clone(),
                    t.lemma.clone().unwrap_or_else(|| "_".into()),
                    t.cpos.clone().unwrap_or_else(|| "_".into()),
                    t.pos.clone(),
                    "_".into(),
                    tree.head(i + 1).to_string(),
                    "_".into(),
                    "_".into(),
                    "_".into(),
                ]
            })
            .collect();
        Ok(ConllSentence { columns, sentence, tree })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Raw column `c` (0-based) of token `i` (1-based).
    pub fn column(&self, i: usize, c: usize) -> &str {
        &self.columns[i - 1][c]
    }

    /// Copy with HEAD replaced by `tree` and DEPREL set to `_`.
    pub fn with_heads(&self, tree: &DepTree) -> Result<Self> {
        if tree.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: tree.len(),
                right: self.len(),
            });
        }
        let mut out = self.clone();
        for (i, row) in out.columns.iter_mut().enumerate() {
            row[HEAD] = tree.head(i + 1).to_string();
            row[DEPREL] = "_".into();
        }
        out.tree = tree.clone();
        Ok(out)
    }

    /// Whether each token counts toward UAS.
    pub fn scored_tokens(&self, exclude_punct: bool) -> Vec<bool> {
        self.sentence
            .tokens()
            .iter()
            .map(|t| !(exclude_punct && is_punct(&t.form)))
            .collect()
    }
}

fn parse_block(rows: &[(usize, &str)]) -> Result<ConllSentence> {
    let first_line = rows[0].0;
    let mut columns = Vec::with_capacity(rows.len());
    let mut tokens = Vec::with_capacity(rows.len());
    let mut heads = Vec::with_capacity(rows.len());
    for (k, &(line, text)) in rows.iter().enumerate() {
        let fields: Vec<&str> = text.split('\t').collect();
        if fields.len() != COLUMNS {
            return Err(Error::Parse {
                line,
                message: format!("expected {COLUMNS} tab-separated columns, found {}", fields.len()),
            });
        }
        let id: usize = fields[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad ID '{}'", fields[0]),
        })?;
        if id != k + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected ID {}, found {id}", k + 1),
            });
        }
        let head: usize = fields[HEAD].parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad HEAD '{}'", fields[HEAD]),
        })?;
        if head > rows.len() {
            return Err(Error::Parse {
                line,
                message: format!("HEAD {head} outside sentence of length {}", rows.len()),
            });
        }
        if head == id {
            return Err(Error::Cycle { line });
        }
        heads.push(head);
        tokens.push(Token {
            form: fields[1].to_string(),
            lemma: (!absent(fields[2])).then(|| fields[2].to_string()),
            cpos: (!absent(fields[3])).then(|| fields[3].to_string()),
            pos: fields[4].to_string(),
        });
        columns.push(std::array::from_fn(|c| fields[c].to_string()));
    }
    let tree = DepTree::new(heads).map_err(|e| match e {
        Error::Cycle { .. } => Error::Cycle { line: first_line },
        other => other,
    })?;
    Ok(ConllSentence {
        columns,
        sentence: AnnotatedSentence::new(tokens)?,
        tree,
    })
}

/// Reads blank-line separated CoNLL-X blocks.
pub fn read_conllx<R: BufRead>(reader: R) -> Result<Vec<ConllSentence>> {
    let mut out = Vec::new();
    let mut lines: Vec<(usize, String)> = Vec::new();
    let flush = |lines: &mut Vec<(usize, String)>, out: &mut Vec<ConllSentence>| -> Result<()> {
        if !lines.is_empty() {
            let rows: Vec<(usize, &str)> = lines.iter().map(|(n, s)| (*n, s.as_str())).collect();
            out.push(parse_block(&rows)?);
            lines.clear();
        }
        Ok(())
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            flush(&mut lines, &mut out)?;
        } else {
            lines.push((i + 1, line.to_string()));
        }
    }
    flush(&mut lines, &mut out)?;
    Ok(out)
}

pub fn parse_conllx(text: &str) -> Result<Vec<ConllSentence>> {
    read_conllx(text.as_bytes())
}

pub fn read_conllx_file(path: impl AsRef<Path>) -> Result<Vec<ConllSentence>> {
    read_conllx(BufReader::new(File::open(path)?))
}

/// Writes sentences, each followed by a blank line.
pub fn write_conllx<W: Write>(sentences: &[ConllSentence], mut w: W) -> io::Result<()> {
    for s in sentences {
        for row in &s.columns {
            writeln!(w, "{}", row.join("\t"))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn to_conllx_string(sentences: &[ConllSentence]) -> String {
    let mut buf = Vec::new();
    write_conllx(sentences, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("inputs are UTF-8")
}

/// The projective tree sharing the most arcs with `gold`.
pub fn projectivize(gold: &DepTree) -> ProjTree {
    if gold.is_projective() {
        return ProjTree::try_from(gold.clone()).expect("checked projective");
    }
    let mut w = EdgeWeightMatrix::new(gold.len(), 0.0);
    for (h, m) in gold.arcs() {
        w.set(h, m, 1.0);
    }
    viterbi_tree(&w).expect("full mask is feasible")
}

fn punct_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\p{P}+$").expect("valid pattern"))
}

/// True when every character of `form` is Unicode punctuation.
pub fn is_punct(form: &str) -> bool {
    punct_regex().is_match(form)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UasReport {
    pub correct: usize,
    pub total: usize,
}

impl UasReport {
    /// Fraction correct; an empty evaluation counts as 1.
    pub fn uas(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    pub fn add(&mut self, other: UasReport) {
        self.correct += other.correct;
        self.total += other.total;
    }
}

/// UAS of one predicted tree against gold, over the tokens flagged `scored`.
pub fn sentence_uas(pred: &DepTree, gold: &DepTree, scored: &[bool]) -> Result<UasReport> {
    if pred.len() != gold.len() || scored.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    let mut r = UasReport::default();
    for m in 1..=gold.len() {
        if scored[m - 1] {
            r.total += 1;
            r.correct += (pred.head(m) == gold.head(m)) as usize;
        }
    }
    Ok(r)
}

pub fn evaluate_uas(predictions: &[ConllSentence], golds: &[ConllSentence], exclude_punct: bool) -> Result<UasReport> {
    if predictions.len() != golds.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: golds.len(),
        });
    }
    let mut total = UasReport::default();
    for (p, g) in predictions.iter().zip(golds) {
        total.add(sentence_uas(&p.tree, &g.tree, &g.scored_tokens(exclude_punct))?);
    }
    Ok(total)
}

/// Deterministic split of `0..n` into (train, held-out) with
/// `ceil(fraction·n)` held out; both keep their original order.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let k = ((n as f64 * fraction).ceil() as usize).min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut held: Vec<usize> = idx[..k].to_vec();
    let mut keep: Vec<usize> = idx[k..].to_vec();
    held.sort_unstable();
    keep.sort_unstable();
    (keep, held)
}
