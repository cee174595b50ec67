//! End-to-end training (pruner, then main model) and parsing.

use log::info;
use rayon::prelude::*;

use crate::conllx::{split_indices, ConllSentence};
use crate::error::{Error, Result};
use crate::factor_graph::FactorConfig;
use crate::features::{FeatureExtractor, FeatureSet};
use crate::pruning::{LengthBoundTable, Pruner};
use crate::sentence::{AnnotatedSentence, CoarseTagMap};
use crate::trainer::{self, decode, EpochRecord, Example, TrainConfig, TrainObjective, TrainOutcome};
use crate::tree::{ArcMask, DepTree, ProjTree};

/// Everything needed to parse new sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct ParserModel {
    pub factors: FactorConfig,
    pub t_max: usize,
    pub theta: Vec<f64>,
    pub pruner: Pruner,
    pub coarse: CoarseTagMap,
    extractor: FeatureExtractor,
}

impl ParserModel {
    pub fn new(
        hash_bits: u32,
        factors: FactorConfig,
        t_max: usize,
        theta: Vec<f64>,
        pruner: Pruner,
        coarse: CoarseTagMap,
    ) -> Result<Self> {
        let extractor = FeatureExtractor::new(hash_bits, FeatureSet::Full)?;
        if theta.len() != extractor.dim() {
            return Err(Error::ShapeMismatch {
                expected: extractor.dim(),
                found: theta.len(),
            });
        }
        if t_max == 0 {
            return Err(Error::InvalidArgument("t_max must be at least 1".into()));
        }
        Ok(ParserModel {
            factors,
            t_max,
            theta,
            pruner,
            coarse,
            extractor,
        })
    }

    pub fn hash_bits(&self) -> u32 {
        self.extractor.bits()
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    /// Copy of `sentence` with coarse tags filled from the model's map.
    pub fn prepare(&self, sentence: &AnnotatedSentence) -> AnnotatedSentence {
        let mut s = sentence.clone();
        s.apply_coarse_map(&self.coarse);
        s
    }

    /// MBR parse after `t_max` BP iterations (the stored default if `None`).
    pub fn parse(&self, sentence: &AnnotatedSentence, t_max: Option<usize>) -> Result<ProjTree> {
        let s = self.prepare(sentence);
        let mask = self.pruner.prune_parents(&s, None)?;
        decode(&s, &mask, &self.extractor, self.factors, &self.theta, t_max.unwrap_or(self.t_max))
    }

    /// Parses in parallel; output order matches input order.
    pub fn parse_all(&self, sentences: &[AnnotatedSentence], t_max: Option<usize>) -> Result<Vec<ProjTree>> {
        sentences.par_iter().map(|s| self.parse(s, t_max)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    pub hash_bits: u32,
    /// Epochs for the pruner; `None` reuses `train.epochs`.
    pub pruner_epochs: Option<usize>,
    pub dev_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            train: TrainConfig::default(),
            hash_bits: crate::features::DEFAULT_HASH_BITS,
            pruner_epochs: None,
            dev_fraction: 0.1,
        }
    }
}

/// Gold-arc recall and candidate counts of pruned masks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PruneStats {
    pub gold_kept: usize,
    pub gold_total: usize,
    pub candidates: usize,
    pub tokens: usize,
}

impl PruneStats {
    pub fn add(&mut self, mask: &ArcMask, gold: &DepTree) {
        for (h, m) in gold.arcs() {
            self.gold_total += 1;
            self.gold_kept += mask.allowed(h, m) as usize;
        }
        self.candidates += mask.num_allowed();
        self.tokens += gold.len();
    }

    pub fn oracle(&self) -> f64 {
        if self.gold_total == 0 {
            1.0
        } else {
            self.gold_kept as f64 / self.gold_total as f64
        }
    }

    pub fn mean_candidates(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.candidates as f64 / self.tokens as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub model: ParserModel,
    pub pruner: TrainOutcome,
    pub main: TrainOutcome,
    pub dev_prune: PruneStats,
}

impl PipelineOutcome {
    /// Both training logs, pruner first.
    pub fn log_lines(&self) -> Vec<String> {
        let pr = self.pruner.log.iter().map(|r| format!("pruner {r}"));
        pr.chain(self.main.log.iter().map(EpochRecord::to_string)).collect()
    }
}

fn add_arcs(mask: &mut ArcMask, tree: &DepTree) {
    for (h, m) in tree.arcs() {
        mask.set(h, m, true);
    }
}

/// Trains the first-order pruner with exact inference over length-bounded masks.
pub fn train_pruner(
    train: &[(AnnotatedSentence, DepTree)],
    dev: &[(AnnotatedSentence, DepTree)],
    cfg: &PipelineConfig,
) -> Result<(Pruner, TrainOutcome)> {
    let bounds = LengthBoundTable::fit(train.iter().map(|(s, t)| (s, t)))?;
    let shell = Pruner::new(vec![0.0; 1 << cfg.hash_bits], bounds.clone(), cfg.hash_bits)?;
    let examples = |data: &[(AnnotatedSentence, DepTree)], train_mode: bool| -> Result<Vec<Example>> {
        data.iter()
            .map(|(s, t)| {
                let mut ex = Example::new(s.clone(), t.clone(), shell.base_mask(s, None))?;
                if train_mode {
                    add_arcs(&mut ex.mask, &ex.gold);
                    add_arcs(&mut ex.mask, &ex.projective_gold);
                }
                Ok(ex)
            })
            .collect()
    };
    let train_ex = examples(train, true)?;
    let dev_ex = examples(dev, false)?;
    let pcfg = TrainConfig {
        objective: TrainObjective::Cll,
        t_max: 1,
        factors: FactorConfig::FIRST_ORDER,
        epochs: cfg.pruner_epochs.unwrap_or(cfg.train.epochs),
        ..cfg.train.clone()
    };
    let out = trainer::train(&train_ex, &dev_ex, shell.extractor(), &pcfg)?;
    let pruner = Pruner::new(out.params.theta.clone(), bounds, cfg.hash_bits)?;
    Ok((pruner, out))
}

/// Builds pruned examples: gold arcs are force-kept when `train_mode`.
pub fn pruned_examples(
    pruner: &Pruner,
    data: &[(AnnotatedSentence, DepTree)],
    train_mode: bool,
) -> Result<Vec<Example>> {
    data.par_iter()
        .map(|(s, t)| {
            let mut ex = Example::new(s.clone(), t.clone(), ArcMask::empty(s.len()))?;
            ex.mask = if train_mode {
                let mut m = pruner.prune_parents(s, Some(ex.projective_gold.as_tree()))?;
                add_arcs(&mut m, t);
                m
            } else {
                pruner.prune_parents(s, None)?
            };
            Ok(ex)
        })
        .collect()
}

/// Fits the coarse map, trains the pruner and then the main model. Without
/// `dev`, a seeded held-out split of `train` is used.
pub fn train_pipeline(
    train: &[ConllSentence],
    dev: Option<&[ConllSentence]>,
    cfg: &PipelineConfig,
) -> Result<PipelineOutcome> {
    cfg.train.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let pairs = |xs: &[ConllSentence]| -> Vec<(AnnotatedSentence, DepTree)> {
        xs.iter().map(|c| (c.sentence.clone(), c.tree.clone())).collect()
    };
    let (mut train_data, mut dev_data) = match dev {
        Some(d) => (pairs(train), pairs(d)),
        None => {
            let (keep, held) = split_indices(train.len(), cfg.dev_fraction, cfg.train.seed);
            let all = pairs(train);
            (
                keep.iter().map(|&i| all[i].clone()).collect(),
                held.iter().map(|&i| all[i].clone()).collect(),
            )
        }
    };
    if train_data.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let coarse = CoarseTagMap::fit(train_data.iter().map(|p| &p.0));
    for (s, _) in train_data.iter_mut().chain(dev_data.iter_mut()) {
        s.apply_coarse_map(&coarse);
    }
    info!("{} training and {} dev sentences", train_data.len(), dev_data.len());

    let (pruner, pruner_out) = train_pruner(&train_data, &dev_data, cfg)?;
    info!("pruner dev UAS {:.4}", pruner_out.best_dev_uas);
    let train_ex = pruned_examples(&pruner, &train_data, true)?;
    let dev_ex = pruned_examples(&pruner, &dev_data, false)?;
    let mut dev_prune = PruneStats::default();
    for ex in &dev_ex {
        dev_prune.add(&ex.mask, &ex.gold);
    }
    info!(
        "pruner oracle {:.4}, {:.2} parents per token",
        dev_prune.oracle(),
        dev_prune.mean_candidates()
    );

    let fx = FeatureExtractor::new(cfg.hash_bits, FeatureSet::Full)?;
    let main = trainer::train(&train_ex, &dev_ex, &fx, &cfg.train)?;
    let model = ParserModel::new(
        cfg.hash_bits,
        cfg.train.factors,
        cfg.train.t_max,
        main.params.theta.clone(),
        pruner,
        coarse,
    )?;
    Ok(PipelineOutcome {
        model,
        pruner: pruner_out,
        main,
        dev_prune,
    })
}

/// Parses every sentence and returns copies with predicted heads.
pub fn parse_corpus(model: &ParserModel, input: &[ConllSentence], t_max: Option<usize>) -> Result<Vec<ConllSentence>> {
    input
        .par_iter()
        .map(|c| c.with_heads(model.parse(&c.sentence, t_max)?.as_tree()))
        .collect()
}
