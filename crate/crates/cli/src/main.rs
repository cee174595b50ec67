use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use structbp::conllx::{evaluate_uas, read_conllx_file, write_conllx};
use structbp::{load_model, parse_corpus, save_model, train_pipeline, FactorConfig, PipelineConfig, TrainConfig, TrainObjective};

#[derive(Parser)]
#[command(name = "structbp", version, about = "Dependency parser trained through structured belief propagation")]
struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a pruner and a parser from CoNLL-X data
    Train(TrainArgs),
    /// Parse a CoNLL-X file and write it to standard output
    Parse(ParseArgs),
    /// Unlabeled attachment score of predictions against gold
    Eval(EvalArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    /// Held-out data; without it 10% of --train is held out
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long, default_value = "l2", value_parser = parse_objective)]
    objective: TrainObjective,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    bp_iters: u32,
    #[arg(long, default_value = "unary,grand,sib", value_parser = parse_factors)]
    factors: FactorConfig,
    #[arg(long, default_value_t = structbp::features::DEFAULT_HASH_BITS,
          value_parser = clap::value_parser!(u32).range(1..=structbp::features::MAX_HASH_BITS as i64))]
    hash_bits: u32,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    /// Pruner epochs (defaults to --epochs)
    #[arg(long)]
    pruner_epochs: Option<usize>,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    batch: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ParseArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Overrides the model's stored iteration count
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    bp_iters: Option<u32>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Score punctuation tokens too
    #[arg(long)]
    include_punct: bool,
}

fn parse_objective(s: &str) -> Result<TrainObjective, String> {
    s.parse().map_err(|e: structbp::Error| e.to_string())
}

fn parse_factors(s: &str) -> Result<FactorConfig, String> {
    s.parse().map_err(|e: structbp::Error| e.to_string())
}

fn train(args: TrainArgs) -> Result<()> {
    let train = read_conllx_file(&args.train).with_context(|| format!("reading {}", args.train.display()))?;
    let dev = match &args.dev {
        Some(p) => Some(read_conllx_file(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let cfg = PipelineConfig {
        train: TrainConfig {
            objective: args.objective,
            t_max: args.bp_iters as usize,
            factors: args.factors,
            epochs: args.epochs,
            batch: args.batch as usize,
            seed: args.seed,
            ..TrainConfig::default()
        },
        hash_bits: args.hash_bits,
        pruner_epochs: args.pruner_epochs,
        ..PipelineConfig::default()
    };
    let out = train_pipeline(&train, dev.as_deref(), &cfg)?;
    let stdout = io::stdout();
    let mut w = stdout.lock();
    for line in out.log_lines() {
        writeln!(w, "{line}")?;
    }
    writeln!(
        w,
        "pruner oracle {:.4} parents {:.2} best epoch {} devUAS {:.4}",
        out.dev_prune.oracle(),
        out.dev_prune.mean_candidates(),
        out.main.best_epoch,
        out.main.best_dev_uas
    )?;
    save_model(&out.model, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn parse(args: ParseArgs) -> Result<()> {
    let model = load_model(&args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    let input = read_conllx_file(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let parsed = parse_corpus(&model, &input, args.bp_iters.map(|n| n as usize))?;
    let mut w = BufWriter::new(io::stdout().lock());
    write_conllx(&parsed, &mut w)?;
    w.flush()?;
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let gold = read_conllx_file(&args.gold).with_context(|| format!("reading {}", args.gold.display()))?;
    let pred = read_conllx_file(&args.pred).with_context(|| format!("reading {}", args.pred.display()))?;
    for (i, (p, g)) in pred.iter().zip(&gold).enumerate() {
        if p.len() != g.len() {
            anyhow::bail!("sentence {} has {} predicted and {} gold tokens", i + 1, p.len(), g.len());
        }
    }
    let r = evaluate_uas(&pred, &gold, !args.include_punct)?;
    println!("UAS {:.4} correct {} total {}", r.uas(), r.correct, r.total);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Parse(a) => parse(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
