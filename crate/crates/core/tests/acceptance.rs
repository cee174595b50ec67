//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p structbp --test acceptance -- --nocapture` or
//! `cargo test --release -p structbp --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use common::{active_features, is_projective, projective_trees, random_hypergraph, random_instance, random_theta, random_tree, rel_err};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use structbp::conllx::{parse_conllx, to_conllx_string};
use structbp::model_file::{from_bytes, to_bytes};
use structbp::objectives::mbr_decode_scores;
use structbp::pipeline::{pruned_examples, train_pruner, PruneStats};
use structbp::synth::{generate_treebank, SynthConfig};
use structbp::trainer::train;
use structbp::{
    annealed_risk, cll_loss_and_gradient, directed_dependency_error, objective_gradient, projectivize, run_bp,
    train_pipeline, ArcMask, DepTree, EisnerChart, FactorConfig, FeatureExtractor, FeatureSet, Objective,
    PipelineConfig, TrainConfig, TrainObjective,
};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn first_order_exactness() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let n = 2 + k % 4;
        let inst = random_instance(&mut rng, n, FactorConfig::FIRST_ORDER, 10);
        let theta = random_theta(&mut rng, 10, 2.0);
        let scores = inst.scores(&theta);
        let bp = run_bp(&inst.graph, &scores, 1, false).map_err(|e| e.to_string())?;
        let score = |h: usize, m: usize| scores[inst.graph.var_index(h, m).expect("full mask")];
        let (_, marg) = common::brute_marginals(n, score, |_, _| true);
        for (i, &(h, m)) in inst.graph.arcs().iter().enumerate() {
            let err = (bp.beliefs.on(i) - marg[h][m]).abs();
            worst = worst.max(err);
            ensure(err <= 1e-8, || format!("case {k}: arc {h}->{m} belief {} vs {}", bp.beliefs.on(i), marg[h][m]))?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.1}s"))?;
    Ok(format!("max abs err {worst:.2e} in {secs:.2}s"))
}

fn gradient_correctness() -> Check {
    let start = Instant::now();
    let objectives = [
        ("L2", Objective::L2),
        ("AR(T=1)", Objective::AnnealedRisk(1.0)),
        ("AR(T=0.1)", Objective::AnnealedRisk(0.1)),
        ("CLL-ERMA", Objective::CllErma),
    ];
    let bits = 12;
    let eps = 1e-5;
    let mut report = Vec::new();
    for (name, obj) in objectives {
        let mut rng = ChaCha8Rng::seed_from_u64(202);
        let mut worst = 0.0f64;
        for k in 0..100 {
            let n = rng.gen_range(2..=4);
            let inst = random_instance(&mut rng, n, FactorConfig::SECOND_ORDER, bits);
            let theta = random_theta(&mut rng, bits, 1.0);
            let heads = projective_trees(n);
            let gold = DepTree::new(heads[rng.gen_range(0..heads.len())].clone()).expect("valid");
            let (value, g) = objective_gradient(&inst, &gold, &theta, obj, 2).map_err(|e| e.to_string())?;
            let dense = g.to_dense(theta.len());
            let active = active_features(&inst);
            let idx = active[rng.gen_range(0..active.len())] as usize;
            let f = |d: f64| {
                let mut t = theta.clone();
                t[idx] += d;
                objective_gradient(&inst, &gold, &t, obj, 2).expect("finite").0
            };
            let fd = (f(eps) - f(-eps)) / (2.0 * eps);
            // Near-zero gradients are compared against the difference quotient's rounding noise.
            let err = rel_err(dense[idx], fd, 1e-4 * value.abs().max(1.0));
            worst = worst.max(err);
            ensure(err <= 1e-4, || format!("{name} case {k} coord {idx}: {} vs fd {fd}", dense[idx]))?;
        }
        report.push(format!("{name} {worst:.1e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("max rel err {} in {secs:.1}s", report.join(", ")))
}

fn hypergraph_backward() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let mut hg = random_hypergraph(&mut rng, 20);
        let c: Vec<f64> = (0..hg.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let io = hg.inside_outside().map_err(|e| e.to_string())?;
        let adj = hg.backward(&io, &c).map_err(|e| e.to_string())?;
        let scale: f64 = io.marginals.iter().zip(&c).map(|(p, c)| (p * c).abs()).sum::<f64>().max(1.0);
        let w0 = hg.weights().to_vec();
        for e in 0..hg.num_edges() {
            let h = 1e-3 * w0[e];
            let mut at = |d: f64| {
                let mut w = w0.clone();
                w[e] += d;
                hg.set_weights(&w).expect("same shape");
                let io = hg.inside_outside().expect("positive weights");
                io.marginals.iter().zip(&c).map(|(p, c)| p * c).sum::<f64>()
            };
            let fd = (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
            hg.set_weights(&w0).expect("same shape");
            let err = rel_err(adj.weight[e], fd, 1e-5 * scale);
            worst = worst.max(err);
            ensure(err <= 1e-6, || format!("graph {k} edge {e}: {} vs fd {fd}", adj.weight[e]))?;
        }
    }
    Ok(format!("max rel err {worst:.1e}"))
}

fn erma_recovers_cll() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let bits = 12;
    let mut worst = 0.0f64;
    for k in 0..20 {
        let n = rng.gen_range(2..=8);
        let inst = random_instance(&mut rng, n, FactorConfig::FIRST_ORDER, bits);
        let theta = random_theta(&mut rng, bits, 2.0);
        let gold = projectivize(&random_tree(&mut rng, n)).into_tree();
        let (a, ga) = cll_loss_and_gradient(&inst, &gold, &theta, 1).map_err(|e| e.to_string())?;
        let (b, gb) = objective_gradient(&inst, &gold, &theta, Objective::CllErma, 1).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs());
        ensure((a - b).abs() <= 1e-8, || format!("sentence {k}: loss {a} vs {b}"))?;
        for (x, y) in ga.to_dense(1 << bits).iter().zip(gb.to_dense(1 << bits)) {
            worst = worst.max((x - y).abs());
            ensure((x - y).abs() <= 1e-8, || format!("sentence {k}: gradient {x} vs {y}"))?;
        }
    }
    Ok(format!("max abs diff {worst:.1e}"))
}

/// Best and runner-up projective tree scores.
fn top_two(n: usize, score: impl Fn(usize, usize) -> f64) -> (Vec<usize>, f64, f64) {
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut second = f64::NEG_INFINITY;
    for h in projective_trees(n) {
        let s: f64 = (1..=n).map(|m| score(h[m - 1], m)).sum();
        if s > best.1 {
            second = best.1;
            best = (h, s);
        } else if s > second {
            second = s;
        }
    }
    (best.0, best.1, second)
}

fn annealed_risk_limit() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = 0.0f64;
    let mut sets = 0;
    while sets < 50 {
        let n = rng.gen_range(2..=6);
        let chart = EisnerChart::new(&ArcMask::full(n)).map_err(|e| e.to_string())?;
        let on: Vec<f64> = chart.arcs().iter().map(|_| rng.gen_range(0.0..1.0)).collect();
        let at = |h: usize, m: usize| on[chart.arc_index(h, m).expect("full mask")];
        let (_, best, second) = top_two(n, at);
        if best - second < 0.01 {
            continue;
        }
        sets += 1;
        let gold = random_tree(&mut rng, n);
        let (j, _) = annealed_risk(&chart, &on, &gold, 1e-4).map_err(|e| e.to_string())?;
        let mbr = mbr_decode_scores(n, chart.arcs(), &on).map_err(|e| e.to_string())?;
        let loss = directed_dependency_error(mbr.as_tree(), &gold).map_err(|e| e.to_string())? as f64;
        let err = (loss - (n as f64 + j)).abs();
        worst = worst.max(err);
        ensure(err <= 1e-3, || format!("set {sets}: loss {loss}, n + R = {}", n as f64 + j))?;
    }
    Ok(format!("max |l - (n + R)| {worst:.1e}"))
}

fn mbr_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for k in 0..100 {
        let n = 1 + k % 5;
        let chart = EisnerChart::new(&ArcMask::full(n)).map_err(|e| e.to_string())?;
        let on: Vec<f64> = chart.arcs().iter().map(|_| rng.gen_range(0.0..1.0)).collect();
        let at = |h: usize, m: usize| on[chart.arc_index(h, m).expect("full mask")];
        let (brute, best, _) = top_two(n, at);
        let mbr = mbr_decode_scores(n, chart.arcs(), &on).map_err(|e| e.to_string())?;
        let got: f64 = (1..=n).map(|m| at(mbr.head(m), m)).sum();
        ensure(mbr.heads() == brute.as_slice(), || format!("case {k}: {:?} ({got}) vs {brute:?} ({best})", mbr.heads()))?;
    }
    Ok("100/100 decodes match enumeration".into())
}

struct Trained {
    uas: Vec<(usize, f64, f64)>,
    oracle: f64,
    parents: f64,
    secs: f64,
}

fn train_desk_scale() -> Result<Trained, String> {
    let start = Instant::now();
    let (n_train, n_dev) = (4000, 1000);
    let all = generate_treebank(&SynthConfig {
        sentences: n_train + n_dev,
        seed: 1,
        ..SynthConfig::default()
    });
    let data: Vec<_> = all.iter().map(|c| (c.sentence.clone(), c.tree.clone())).collect();
    let (train_data, dev_data) = data.split_at(n_train);
    let cfg = PipelineConfig {
        pruner_epochs: Some(5),
        ..PipelineConfig::default()
    };
    let (pruner, _) = train_pruner(train_data, dev_data, &cfg).map_err(|e| e.to_string())?;
    let train_ex = pruned_examples(&pruner, train_data, true).map_err(|e| e.to_string())?;
    let dev_ex = pruned_examples(&pruner, dev_data, false).map_err(|e| e.to_string())?;
    let mut stats = PruneStats::default();
    for ex in &dev_ex {
        stats.add(&ex.mask, &ex.gold);
    }
    let fx = FeatureExtractor::new(cfg.hash_bits, FeatureSet::Full).map_err(|e| e.to_string())?;
    let mut uas = Vec::new();
    for t_max in [1, 2] {
        let mut pair = [0.0; 2];
        for (slot, objective) in [TrainObjective::Cll, TrainObjective::L2].into_iter().enumerate() {
            let tc = TrainConfig {
                objective,
                t_max,
                factors: FactorConfig::SECOND_ORDER,
                epochs: 10,
                ..TrainConfig::default()
            };
            pair[slot] = train(&train_ex, &dev_ex, &fx, &tc).map_err(|e| e.to_string())?.best_dev_uas;
        }
        uas.push((t_max, pair[0], pair[1]));
    }
    Ok(Trained {
        uas,
        oracle: stats.oracle(),
        parents: stats.mean_candidates(),
        secs: start.elapsed().as_secs_f64(),
    })
}

fn directional(trained: &Result<Trained, String>) -> Check {
    let t = trained.as_ref().map_err(Clone::clone)?;
    let mut parts = Vec::new();
    for &(t_max, cll, l2) in &t.uas {
        let gap = 100.0 * (l2 - cll);
        parts.push(format!("t={t_max}: CLL {:.2} L2 {:.2} gap {gap:+.2}", 100.0 * cll, 100.0 * l2));
        ensure(gap >= -0.1, || format!("t_max {t_max}: L2 {l2:.4} below CLL {cll:.4} by more than 0.1 points"))?;
        if t_max == 1 {
            ensure(gap >= 0.0, || format!("t_max 1: L2 {l2:.4} below CLL {cll:.4}"))?;
        }
    }
    Ok(format!("{} ({:.0}s)", parts.join("; "), t.secs))
}

fn pruning_oracle(trained: &Result<Trained, String>) -> Check {
    let t = trained.as_ref().map_err(Clone::clone)?;
    ensure(t.oracle >= 0.99, || format!("oracle {:.4}", t.oracle))?;
    ensure(t.parents <= 10.0, || format!("{:.2} parents per token", t.parents))?;
    Ok(format!("oracle {:.4}, {:.2} parents per token", t.oracle, t.parents))
}

fn infrastructure() -> Check {
    let corpus = generate_treebank(&SynthConfig {
        sentences: 200,
        seed: 9,
        nonprojective_rate: 0.2,
        ..SynthConfig::default()
    });
    let text = to_conllx_string(&corpus);
    let back = parse_conllx(&text).map_err(|e| e.to_string())?;
    ensure(back == corpus && to_conllx_string(&back) == text, || "CoNLL-X round trip differs".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for k in 0..1000 {
        let n = rng.gen_range(1..=12);
        let t = random_tree(&mut rng, n);
        let p = projectivize(&t);
        ensure(is_projective(p.heads()), || format!("tree {k}: {:?} not projective", p.heads()))?;
        ensure(projectivize(p.as_tree()) == p, || format!("tree {k}: not idempotent"))?;
        if t.is_projective() {
            ensure(p.as_tree() == &t, || format!("tree {k}: projective input changed"))?;
        }
    }

    let cfg = PipelineConfig {
        train: TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        },
        hash_bits: 14,
        pruner_epochs: Some(2),
        ..PipelineConfig::default()
    };
    let data = &corpus[..120];
    let a = train_pipeline(data, None, &cfg).map_err(|e| e.to_string())?;
    let b = train_pipeline(data, None, &cfg).map_err(|e| e.to_string())?;
    let bytes = to_bytes(&a.model);
    ensure(bytes == to_bytes(&b.model), || "same seed gave different models".into())?;
    let loaded = from_bytes(&bytes).map_err(|e| e.to_string())?;
    ensure(loaded == a.model && to_bytes(&loaded) == bytes, || "model file round trip differs".into())?;
    Ok(format!(
        "round trip of {} sentences, 1000 projectivized trees, {}-byte model reproduced",
        corpus.len(),
        bytes.len()
    ))
}

fn run(name: &str, f: impl FnOnce() -> Check) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    match outcome {
        Ok(msg) => {
            println!("PASS {name}: {msg}");
            true
        }
        Err(msg) => {
            println!("FAIL {name}: {msg}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= run("1 first-order exactness", first_order_exactness);
    ok &= run("2 gradient correctness", gradient_correctness);
    ok &= run("3 hypergraph backward", hypergraph_backward);
    ok &= run("4 ERMA recovers CLL", erma_recovers_cll);
    ok &= run("5 annealed-risk limit", annealed_risk_limit);
    ok &= run("6 MBR decoder oracle", mbr_oracle);
    let trained = catch_unwind(train_desk_scale).unwrap_or_else(|_| Err("training panicked".into()));
    ok &= run("7 directional L2 vs CLL", || directional(&trained));
    ok &= run("8 pruning oracle", || pruning_oracle(&trained));
    ok &= run("9 infrastructure", infrastructure);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
