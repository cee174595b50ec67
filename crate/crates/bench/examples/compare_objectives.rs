//! Trains CLL and L2 second-order parsers on a synthetic treebank and
//! reports dev UAS for each BP iteration budget.
//!
//! Usage: compare_objectives [sentences] [epochs] [t_max,...] [dev sentences] [seed]

use std::time::Instant;

use structbp::pipeline::{pruned_examples, train_pruner, PipelineConfig, PruneStats};
use structbp::synth::{generate_treebank, SynthConfig};
use structbp::trainer::{train, TrainConfig, TrainObjective};
use structbp::{FactorConfig, FeatureExtractor, FeatureSet};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let iters: Vec<usize> = args
        .get(3)
        .map(|s| s.split(',').filter_map(|x| x.parse().ok()).collect())
        .unwrap_or_else(|| vec![1, 2]);
    let dev_n: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(n / 10);
    let seed: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1);

    let all = generate_treebank(&SynthConfig {
        sentences: n + dev_n,
        seed,
        ..SynthConfig::default()
    });
    let data: Vec<_> = all.iter().map(|c| (c.sentence.clone(), c.tree.clone())).collect();
    let (train_data, dev_data) = data.split_at(n);
    let tokens: usize = train_data.iter().map(|p| p.0.len()).sum();
    println!("{} train sentences ({tokens} tokens), {} dev", train_data.len(), dev_data.len());

    let cfg = PipelineConfig {
        train: TrainConfig {
            epochs,
            ..TrainConfig::default()
        },
        pruner_epochs: Some(epochs.min(5)),
        ..PipelineConfig::default()
    };
    let t = Instant::now();
    let (pruner, out) = train_pruner(train_data, dev_data, &cfg).expect("pruner");
    println!("pruner devUAS {:.4} in {:.1?}", out.best_dev_uas, t.elapsed());
    let train_ex = pruned_examples(&pruner, train_data, true).expect("masks");
    let dev_ex = pruned_examples(&pruner, dev_data, false).expect("masks");
    let mut stats = PruneStats::default();
    for ex in &dev_ex {
        stats.add(&ex.mask, &ex.gold);
    }
    println!("oracle {:.4} parents/token {:.2}", stats.oracle(), stats.mean_candidates());
    let mut base = PruneStats::default();
    for (s, t) in dev_data {
        base.add(&pruner.base_mask(s, None), t);
    }
    println!("length bounds alone: oracle {:.4} parents/token {:.2}", base.oracle(), base.mean_candidates());

    let fx = FeatureExtractor::new(cfg.hash_bits, FeatureSet::Full).expect("extractor");
    for &t_max in &iters {
        for objective in [TrainObjective::Cll, TrainObjective::L2] {
            let tc = TrainConfig {
                objective,
                t_max,
                factors: FactorConfig::SECOND_ORDER,
                ..cfg.train.clone()
            };
            let t = Instant::now();
            let out = train(&train_ex, &dev_ex, &fx, &tc).expect("training");
            for r in &out.log {
                println!("  {r}");
            }
            println!(
                "t_max {t_max} {objective}: devUAS {:.4} (epoch {}) in {:.1?}",
                out.best_dev_uas,
                out.best_epoch,
                t.elapsed()
            );
        }
    }
}
