//! `stance-gp`: rumour stance classification with Gaussian processes.

mod config;
mod output;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stance_gp::experiments::{ard_report, evaluate, results_tsv, run_sweep, sweep_tsv, train_on_records};
use stance_gp::persist::{load_model, save_model};
use stance_gp::textproc::filter_retweets;
use stance_gp::{classify, Corpus, EvalMode, FeatureKind, MethodSpec, ModelVariant, TweetRecord};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<stance_gp::Error> for CliError {
    fn from(e: stance_gp::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else if matches!(e, stance_gp::Error::InvalidParameter(_)) {
            CliError::Usage(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "stance-gp", version, about = "Rumour stance classification with Gaussian processes")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Corpus TSV (rumour_id, tweet_id, seq_index, label, text).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Brown cluster lexicon (bitstring, word, count).
    #[arg(long, global = true)]
    brown: Option<PathBuf>,
    #[arg(long, global = true)]
    stopwords: Option<PathBuf>,
    #[arg(long, global = true)]
    emoticons: Option<PathBuf>,
    /// Output file; defaults to a file in `paths.output`, else stdout.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MethodArgs {
    /// GP, GPPooled, GPICM or Majority.
    #[arg(long)]
    variant: Option<ModelVariant>,
    /// BOW or Brown.
    #[arg(long)]
    features: Option<FeatureKind>,
}

#[derive(Args, Debug)]
struct FoldArgs {
    /// LOO or LPO.
    #[arg(long)]
    mode: Option<EvalMode>,
    /// Target tweets added to training.
    #[arg(long)]
    k: Option<usize>,
    /// First test position in each target rumour.
    #[arg(long)]
    l: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a corpus and report per-rumour label counts.
    IngestCheck,
    /// Fit a one-vs-all model on the whole corpus and save it.
    Train {
        #[command(flatten)]
        method: MethodArgs,
        /// Per-feature variances instead of a single one.
        #[arg(long)]
        ard: bool,
    },
    /// Classify every tweet of a corpus with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
    },
    /// Evaluate a method over all folds.
    Eval {
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        fold: FoldArgs,
    },
    /// Evaluate a method under LPO for each k.
    Sweep {
        #[command(flatten)]
        method: MethodArgs,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',')]
        k_values: Option<Vec<usize>>,
        #[arg(long)]
        l: Option<usize>,
    },
    /// Majority-label baseline.
    Baseline {
        #[command(flatten)]
        fold: FoldArgs,
        /// Use the bundled per-rumour label counts instead of a corpus.
        #[arg(long, value_parser = ["table2"])]
        fixture: Option<String>,
    },
    /// Top Brown clusters by learned relevance, per stance.
    ArdReport {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        l: Option<usize>,
        #[arg(long)]
        top_n: Option<usize>,
    },
}

impl Command {
    fn default_file_name(&self) -> &'static str {
        match self {
            Command::IngestCheck => "counts.tsv",
            Command::Train { .. } => "model.txt",
            Command::Predict { .. } => "predictions.tsv",
            Command::Eval { .. } => "results.tsv",
            Command::Sweep { .. } => "sweep.tsv",
            Command::Baseline { .. } => "baseline.tsv",
            Command::ArdReport { .. } => "ard_report.tsv",
        }
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let c = &cli.common;
    let mut cfg = RunConfig::load(c.config.as_deref())?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    for (slot, flag) in [
        (&mut cfg.corpus, &c.corpus),
        (&mut cfg.brown, &c.brown),
        (&mut cfg.stopwords, &c.stopwords),
        (&mut cfg.emoticons, &c.emoticons),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    let apply_method = |cfg: &mut RunConfig, m: &MethodArgs| {
        if let Some(v) = m.variant {
            cfg.method.variant = v;
        }
        if let Some(f) = m.features {
            cfg.method.features = f;
        }
    };
    let apply_fold = |cfg: &mut RunConfig, f: &FoldArgs| {
        if let Some(m) = f.mode {
            cfg.mode = m;
        }
        if let Some(k) = f.k {
            cfg.k = k;
        }
        if let Some(l) = f.l {
            cfg.l = l;
        }
    };
    match &cli.command {
        Command::Train { method, .. } => apply_method(&mut cfg, method),
        Command::Eval { method, fold } => {
            apply_method(&mut cfg, method);
            apply_fold(&mut cfg, fold);
        }
        Command::Sweep { method, k_values, l } => {
            apply_method(&mut cfg, method);
            if let Some(ks) = k_values {
                cfg.k_values.clone_from(ks);
            }
            if let Some(l) = l {
                cfg.l = *l;
            }
        }
        Command::Baseline { fold, .. } => {
            cfg.method.variant = ModelVariant::Majority;
            apply_fold(&mut cfg, fold);
        }
        Command::ArdReport { k, l, top_n } => {
            cfg.method = MethodSpec::new(ModelVariant::GpIcm, FeatureKind::Brown);
            cfg.mode = EvalMode::Lpo;
            if let Some(k) = k {
                cfg.k = *k;
            }
            if let Some(l) = l {
                cfg.l = *l;
            }
            if let Some(n) = top_n {
                cfg.top_n = *n;
            }
        }
        Command::IngestCheck | Command::Predict { .. } => {}
    }
    cfg.check_paths()?;
    Ok(cfg)
}

fn load_corpus(cfg: &RunConfig) -> Result<Corpus, CliError> {
    Ok(Corpus::ingest(cfg.corpus_path()?)?)
}

/// Every record of the corpus with retweets removed, in rumour order.
fn training_records(corpus: &Corpus, pre: &stance_gp::Preprocessor) -> Vec<TweetRecord> {
    let all: Vec<TweetRecord> = corpus.iter().flat_map(|(_, recs)| recs.iter().cloned()).collect();
    filter_retweets(&all, pre)
}

fn predictions_tsv(model: &stance_gp::OneVsAllModel, corpus: &Corpus, pre: &stance_gp::Preprocessor) -> Result<String, CliError> {
    let mut out = String::from("tweet_id\tlabel\tp_support\tp_deny\tp_question\n");
    for (rumour, records) in corpus.iter() {
        let task = model.task_for(rumour)?;
        for r in records {
            let x = model.feature_space.featurize(&pre.preprocess(&r.text));
            let (label, post) = classify(model, &x, task)?;
            let [s, d, q] = post.probs;
            writeln!(out, "{}\t{}\t{s}\t{d}\t{q}", r.tweet_id, label.as_str()).unwrap();
        }
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = build_config(cli)?;
    let out = cli.common.out.clone().or_else(|| {
        cfg.output
            .as_ref()
            .map(|dir| dir.join(cli.command.default_file_name()))
    });
    let body = match &cli.command {
        Command::IngestCheck => load_corpus(&cfg)?.count_report(),
        Command::Train { ard, .. } => {
            let corpus = load_corpus(&cfg)?;
            let res = cfg.resources()?;
            let train = training_records(&corpus, &res.pre);
            let refs: Vec<&TweetRecord> = train.iter().collect();
            let model = train_on_records(&refs, cfg.method.variant, cfg.method.features, *ard, &res, &cfg.train_config())?;
            save_model(&model, cfg.seed)
        }
        Command::Predict { model } => {
            let text = std::fs::read_to_string(model).map_err(|e| CliError::Data(format!("{}: {e}", model.display())))?;
            let lexicon = cfg.lexicon()?;
            let model = load_model(&text, lexicon.as_ref())?;
            let corpus = load_corpus(&cfg)?;
            let res = cfg.resources()?;
            predictions_tsv(&model, &corpus, &res.pre)?
        }
        Command::Eval { .. } | Command::Baseline { fixture: None, .. } => {
            let corpus = load_corpus(&cfg)?;
            evaluation_report(&corpus, &cfg)?
        }
        Command::Baseline { fixture: Some(_), .. } => evaluation_report(&Corpus::riots_fixture(), &cfg)?,
        Command::Sweep { .. } => {
            let corpus = load_corpus(&cfg)?;
            let res = cfg.resources()?;
            let rows = run_sweep(&corpus, cfg.method, &cfg.k_values, cfg.l, &res, &cfg.train_config())?;
            sweep_tsv(&rows)
        }
        Command::ArdReport { .. } => {
            let corpus = load_corpus(&cfg)?;
            let res = cfg.resources()?;
            if res.lexicon.is_none() {
                return Err(CliError::Usage("ard-report needs a Brown lexicon (--brown or paths.brown)".into()));
            }
            ard_report(&corpus, cfg.k, cfg.l, cfg.top_n, &res, &cfg.train_config())?.to_tsv()
        }
    };
    output::emit(out.as_deref(), &format!("{}{body}", cfg.header()))
}

fn evaluation_report(corpus: &Corpus, cfg: &RunConfig) -> Result<String, CliError> {
    let res = cfg.resources()?;
    let l = if cfg.mode == EvalMode::Loo { 0 } else { cfg.l };
    let result = evaluate(corpus, cfg.method, cfg.mode, cfg.k, l, &res, &cfg.train_config())?;
    eprintln!("macro_accuracy\t{:.3}", result.macro_accuracy);
    Ok(results_tsv(std::slice::from_ref(&result)))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stance-gp: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
