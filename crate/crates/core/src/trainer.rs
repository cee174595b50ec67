//! AdaGrad training with early stopping on dev UAS.

use std::fmt;
use std::str::FromStr;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::conllx::{is_punct, projectivize, sentence_uas, UasReport};
use crate::error::{Error, Result};
use crate::factor_graph::{FactorConfig, Instance, ModelParams};
use crate::features::FeatureExtractor;
use crate::objectives::{self, mbr_decode, objective_gradient, AnnealSchedule, Objective};
use crate::sentence::AnnotatedSentence;
use crate::tree::{ArcMask, DepTree, ProjTree};

pub const ADAGRAD_DELTA: f64 = 1e-8;
pub const LEARNING_RATES: [f64; 5] = [0.01, 0.05, 0.1, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainObjective {
    Cll,
    L2,
    L2ThenAr,
}

impl FromStr for TrainObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cll" => Ok(TrainObjective::Cll),
            "l2" => Ok(TrainObjective::L2),
            "l2+ar" => Ok(TrainObjective::L2ThenAr),
            _ => Err(Error::InvalidArgument(format!("unknown objective '{s}' (expected cll, l2 or l2+ar)"))),
        }
    }
}

impl fmt::Display for TrainObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainObjective::Cll => "cll",
            TrainObjective::L2 => "l2",
            TrainObjective::L2ThenAr => "l2+ar",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub objective: TrainObjective,
    pub t_max: usize,
    pub factors: FactorConfig,
    pub epochs: usize,
    pub batch: usize,
    /// `None` means `1/(0.1·D)`.
    pub lambda: Option<f64>,
    pub learning_rates: Vec<f64>,
    pub tune_sample: usize,
    pub anneal_start: f64,
    pub anneal_end: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: TrainObjective::L2,
            t_max: 2,
            factors: FactorConfig::SECOND_ORDER,
            epochs: 10,
            batch: 4,
            lambda: None,
            learning_rates: LEARNING_RATES.to_vec(),
            tune_sample: 200,
            anneal_start: 0.1,
            anneal_end: 1e-4,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 || self.batch == 0 || self.learning_rates.is_empty() {
            return Err(Error::InvalidArgument("t_max, batch and learning rates must be non-empty".into()));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                return Err(Error::InvalidArgument(format!("lambda must be positive, got {l}")));
            }
        }
        Ok(())
    }

    pub fn lambda_for(&self, num_train: usize) -> f64 {
        self.lambda.unwrap_or(1.0 / (0.1 * num_train.max(1) as f64))
    }
}

/// A training or evaluation sentence with its candidate-arc mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub sentence: AnnotatedSentence,
    pub gold: DepTree,
    pub projective_gold: ProjTree,
    pub mask: ArcMask,
    pub scored: Vec<bool>,
}

impl Example {
    pub fn new(sentence: AnnotatedSentence, gold: DepTree, mask: ArcMask) -> Result<Self> {
        let n = sentence.len();
        if gold.len() != n || mask.len() != n {
            return Err(Error::LengthMismatch { left: n, right: gold.len().max(mask.len()) });
        }
        let scored = sentence.tokens().iter().map(|t| !is_punct(&t.form)).collect();
        Ok(Example {
            projective_gold: projectivize(&gold),
            sentence,
            gold,
            mask,
            scored,
        })
    }

    pub fn instance(&self, fx: &FeatureExtractor, factors: FactorConfig) -> Result<Instance> {
        Instance::new(&self.sentence, &self.mask, factors, fx)
    }

    /// Value and gradient; CLL uses the projectivized gold tree.
    pub fn gradient(
        &self,
        fx: &FeatureExtractor,
        factors: FactorConfig,
        theta: &[f64],
        objective: Objective,
        t_max: usize,
    ) -> Result<(f64, objectives::SparseGradient)> {
        let inst = self.instance(fx, factors)?;
        let gold = match objective {
            Objective::Cll | Objective::CllErma => self.projective_gold.as_tree(),
            _ => &self.gold,
        };
        objective_gradient(&inst, gold, theta, objective, t_max)
    }
}

/// MBR parse from BP beliefs after `t_max` iterations.
pub fn decode(
    sentence: &AnnotatedSentence,
    mask: &ArcMask,
    fx: &FeatureExtractor,
    factors: FactorConfig,
    theta: &[f64],
    t_max: usize,
) -> Result<ProjTree> {
    let inst = Instance::new(sentence, mask, factors, fx)?;
    let b = objectives::beliefs(&inst, theta, t_max)?;
    mbr_decode(&inst.graph, &b)
}

/// UAS over `dev` excluding punctuation; sentences that fail to decode count as wrong.
pub fn evaluate(dev: &[Example], fx: &FeatureExtractor, factors: FactorConfig, theta: &[f64], t_max: usize) -> UasReport {
    let reports: Vec<UasReport> = dev
        .par_iter()
        .map(|ex| {
            let pred = match decode(&ex.sentence, &ex.mask, fx, factors, theta, t_max) {
                Ok(p) => p.into_tree(),
                Err(e) => {
                    warn!("decoding failed: {e}");
                    DepTree::new(vec![0; ex.gold.len()]).expect("flat tree")
                }
            };
            sentence_uas(&pred, &ex.gold, &ex.scored).expect("lengths checked")
        })
        .collect();
    let mut total = UasReport::default();
    for r in reports {
        total.add(r);
    }
    total
}

/// AdaGrad composite mirror descent with lazily applied ℓ2 shrinkage.
#[derive(Debug, Clone)]
pub struct AdaGrad {
    pub eta: f64,
    pub lambda: f64,
    step: u64,
    last: Vec<u64>,
}

impl AdaGrad {
    pub fn new(dim: usize, eta: f64, lambda: f64) -> Self {
        AdaGrad {
            eta,
            lambda,
            step: 0,
            last: vec![0; dim],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    fn shrink(&self, theta: &mut f64, accum: f64, k: u64) {
        if k == 0 || self.lambda == 0.0 || *theta == 0.0 {
            return;
        }
        let h = ADAGRAD_DELTA + accum.sqrt();
        *theta *= (h / (h + self.eta * self.lambda)).powf(k as f64);
    }

    /// One step; `grad` must be sorted by index without duplicates.
    pub fn step(&mut self, params: &mut ModelParams, grad: &[(u32, f64)]) {
        self.step += 1;
        let t = self.step;
        for &(j, g) in grad {
            let j = j as usize;
            let (theta, accum) = (&mut params.theta[j], &mut params.accum[j]);
            self.shrink(theta, *accum, t - 1 - self.last[j]);
            *accum += g * g;
            let h = ADAGRAD_DELTA + accum.sqrt();
            *theta = h / (h + self.eta * self.lambda) * (*theta - self.eta * g / h);
            self.last[j] = t;
        }
    }

    /// Brings every coordinate up to date.
    pub fn flush(&mut self, params: &mut ModelParams) {
        let t = self.step;
        for j in 0..params.theta.len() {
            self.shrink(&mut params.theta[j], params.accum[j], t - self.last[j]);
            self.last[j] = t;
        }
    }
}

/// A single AdaGrad step with no pending shrinkage.
pub fn adagrad_update(params: &mut ModelParams, grad: &[(u32, f64)], eta: f64, lambda: f64) {
    AdaGrad::new(params.dim(), eta, lambda).step(params, grad);
}

#[derive(Debug, Clone, Copy)]
enum Stage {
    Fixed(Objective),
    Annealed(AnnealSchedule),
}

impl Stage {
    fn objective(&self, step: usize) -> Objective {
        match *self {
            Stage::Fixed(o) => o,
            Stage::Annealed(s) => Objective::AnnealedRisk(s.temperature(step)),
        }
    }

    fn temperature(&self, step: usize) -> f64 {
        match *self {
            Stage::Fixed(_) => 0.0,
            Stage::Annealed(s) => s.temperature(step),
        }
    }
}

/// Averaged batch gradient (sorted, merged) and summed objective; failed
/// sentences are logged and skipped.
fn batch_gradient(
    batch: &[&Example],
    fx: &FeatureExtractor,
    factors: FactorConfig,
    theta: &[f64],
    objective: Objective,
    t_max: usize,
) -> (f64, usize, Vec<(u32, f64)>) {
    let results: Vec<Result<(f64, objectives::SparseGradient)>> = batch
        .par_iter()
        .map(|ex| ex.gradient(fx, factors, theta, objective, t_max))
        .collect();
    let mut raw = Vec::new();
    let mut value = 0.0;
    let mut ok = 0;
    for r in results {
        match r {
            Ok((v, g)) if v.is_finite() => {
                value += v;
                ok += 1;
                raw.extend(g.entries);
            }
            Ok((v, _)) => warn!("skipping sentence with objective {v}"),
            Err(e) => warn!("skipping sentence: {e}"),
        }
    }
    raw.sort_by_key(|e| e.0);
    let scale = 1.0 / ok.max(1) as f64;
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(raw.len());
    for (i, g) in raw {
        match merged.last_mut() {
            Some(e) if e.0 == i => e.1 += g,
            _ => merged.push((i, g)),
        }
    }
    for e in &mut merged {
        e.1 *= scale;
    }
    (value, ok, merged)
}

struct PassResult {
    objective: f64,
    counted: usize,
}

#[allow(clippy::too_many_arguments)]
fn run_pass(
    order: &[&Example],
    fx: &FeatureExtractor,
    cfg: &TrainConfig,
    stage: Stage,
    params: &mut ModelParams,
    opt: &mut AdaGrad,
    step: &mut usize,
) -> PassResult {
    let mut total = 0.0;
    let mut counted = 0;
    for batch in order.chunks(cfg.batch) {
        let objective = stage.objective(*step);
        let (v, ok, grad) = batch_gradient(batch, fx, cfg.factors, &params.theta, objective, cfg.t_max);
        total += v;
        counted += ok;
        if ok > 0 {
            opt.step(params, &grad);
        }
        *step += 1;
    }
    opt.flush(params);
    PassResult {
        objective: if counted == 0 { f64::NAN } else { total / counted as f64 },
        counted,
    }
}

fn mean_objective(examples: &[&Example], fx: &FeatureExtractor, cfg: &TrainConfig, theta: &[f64], objective: Objective) -> f64 {
    let vals: Vec<Option<f64>> = examples
        .par_iter()
        .map(|ex| ex.gradient(fx, cfg.factors, theta, objective, cfg.t_max).ok().map(|r| r.0))
        .collect();
    let ok: Vec<f64> = vals.into_iter().flatten().collect();
    if ok.is_empty() {
        f64::NAN
    } else {
        ok.iter().sum::<f64>() / ok.len() as f64
    }
}

fn shuffled(examples: &[Example], seed: u64) -> Vec<&Example> {
    let mut order: Vec<&Example> = examples.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

fn tune(
    sample: &[&Example],
    fx: &FeatureExtractor,
    cfg: &TrainConfig,
    stage: Stage,
    init: &ModelParams,
    lambda: f64,
) -> f64 {
    if cfg.learning_rates.len() == 1 {
        return cfg.learning_rates[0];
    }
    let mut best: Option<(f64, f64)> = None;
    for &eta in &cfg.learning_rates {
        let mut params = init.clone();
        let mut opt = AdaGrad::new(params.dim(), eta, lambda);
        let mut step = 0;
        run_pass(sample, fx, cfg, stage, &mut params, &mut opt, &mut step);
        let value = if params.theta.iter().all(|x| x.is_finite()) {
            mean_objective(sample, fx, cfg, &params.theta, stage.objective(0))
        } else {
            f64::NAN
        };
        info!("lr {eta} tuning objective {value}");
        if value.is_finite() && best.is_none_or(|(_, b)| value < b) {
            best = Some((eta, value));
        }
    }
    best.map_or(cfg.learning_rates[0], |b| b.0)
}

/// Picks the learning rate with the lowest objective after one pass over
/// at most `cfg.tune_sample` sentences; non-finite candidates are dropped.
pub fn tune_learning_rate(sample: &[Example], fx: &FeatureExtractor, cfg: &TrainConfig) -> Result<f64> {
    cfg.validate()?;
    if sample.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let order = shuffled(sample, cfg.seed);
    let order = &order[..order.len().min(cfg.tune_sample)];
    let stage = match cfg.objective {
        TrainObjective::Cll => Stage::Fixed(Objective::Cll),
        _ => Stage::Fixed(Objective::L2),
    };
    Ok(tune(order, fx, cfg, stage, &ModelParams::zeros(fx.bits()), cfg.lambda_for(sample.len())))
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub dev_uas: f64,
    pub learning_rate: f64,
    pub temperature: f64,
}

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch {} obj {:.6} devUAS {:.4} lr {} T {}",
            self.epoch, self.objective, self.dev_uas, self.learning_rate, self.temperature
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights of the best dev epoch.
    pub params: ModelParams,
    pub best_dev_uas: f64,
    /// 0 when no epoch beat the starting point.
    pub best_epoch: usize,
    pub initial_dev_uas: f64,
    pub log: Vec<EpochRecord>,
}

struct StageOutcome {
    params: ModelParams,
    best_uas: f64,
    best_epoch: usize,
}

#[allow(clippy::too_many_arguments)]
fn run_stage(
    train: &[Example],
    dev: &[Example],
    fx: &FeatureExtractor,
    cfg: &TrainConfig,
    stage: Stage,
    init: ModelParams,
    init_uas: f64,
    first_epoch: usize,
    log: &mut Vec<EpochRecord>,
) -> StageOutcome {
    let lambda = cfg.lambda_for(train.len());
    let sample_order = shuffled(train, cfg.seed ^ 0x5eed);
    let sample = &sample_order[..sample_order.len().min(cfg.tune_sample)];
    let eta = if cfg.epochs == 0 {
        cfg.learning_rates[0]
    } else {
        tune(sample, fx, cfg, stage, &init, lambda)
    };
    info!("learning rate {eta}, lambda {lambda}");

    let mut params = init.clone();
    let mut best = StageOutcome {
        params: init,
        best_uas: init_uas,
        best_epoch: 0,
    };
    let mut opt = AdaGrad::new(params.dim(), eta, lambda);
    let mut step = 0;
    for e in 0..cfg.epochs {
        let epoch = first_epoch + e;
        let order = shuffled(train, cfg.seed.wrapping_add(1 + epoch as u64));
        let pass = run_pass(&order, fx, cfg, stage, &mut params, &mut opt, &mut step);
        if pass.counted == 0 {
            warn!("epoch {epoch}: every sentence was skipped");
        }
        let uas = evaluate(dev, fx, cfg.factors, &params.theta, cfg.t_max).uas();
        let rec = EpochRecord {
            epoch,
            objective: pass.objective,
            dev_uas: uas,
            learning_rate: eta,
            temperature: stage.temperature(step.saturating_sub(1)),
        };
        info!("{rec}");
        log.push(rec);
        if uas > best.best_uas || (dev.is_empty() && params.theta.iter().all(|x| x.is_finite())) {
            best.best_uas = uas;
            best.best_epoch = epoch;
            best.params = params.clone();
        }
    }
    best
}

/// Trains from θ = 0 and returns the best-dev snapshot.
pub fn train(train: &[Example], dev: &[Example], fx: &FeatureExtractor, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let init = ModelParams::zeros(fx.bits());
    let initial_dev_uas = evaluate(dev, fx, cfg.factors, &init.theta, cfg.t_max).uas();
    let mut log = Vec::new();
    let first = match cfg.objective {
        TrainObjective::Cll => Stage::Fixed(Objective::Cll),
        _ => Stage::Fixed(Objective::L2),
    };
    let mut out = run_stage(train, dev, fx, cfg, first, init, initial_dev_uas, 1, &mut log);
    if cfg.objective == TrainObjective::L2ThenAr {
        let steps = cfg.epochs * train.len().div_ceil(cfg.batch);
        let schedule = AnnealSchedule {
            start: cfg.anneal_start,
            end: cfg.anneal_end,
            steps,
        };
        let stage1_best = out.best_epoch;
        let mut second = run_stage(
            train,
            dev,
            fx,
            cfg,
            Stage::Annealed(schedule),
            out.params,
            out.best_uas,
            cfg.epochs + 1,
            &mut log,
        );
        if second.best_epoch == 0 {
            second.best_epoch = stage1_best;
        }
        out = second;
    }
    Ok(TrainOutcome {
        params: out.params,
        best_dev_uas: out.best_uas,
        best_epoch: out.best_epoch,
        initial_dev_uas,
        log,
    })
}
