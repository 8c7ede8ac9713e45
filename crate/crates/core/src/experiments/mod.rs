//! Leave-one-out and leave-part-out evaluation of the stance classifiers.
//!
//! A fold holds out one target rumour. Under [`EvalMode::Loo`] the whole
//! target rumour is the test set and training uses every other rumour. Under
//! [`EvalMode::Lpo`] the first `k` target tweets join the training set and the
//! test set is every target tweet with `seq_index >= l`. Retweets are filtered
//! from the training side only.

mod corpus;
pub mod synthetic;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

pub use corpus::Corpus;

use crate::error::{Error, Result};
use crate::hyperopt::KernelFamily;
use crate::multiclass::{ard_relevance, classify, train_ova, ClassPosterior, FeatureSpace, OneVsAllModel, TrainConfig, TrainExample};
use crate::textproc::{build_vocabulary, filter_retweets, BrownLexicon, Preprocessor, StanceLabel, TokenSequence, TweetRecord};

/// First test index within the target rumour for leave-part-out folds.
pub const DEFAULT_HOLDOUT: usize = 50;
/// Default training-prefix sizes for a sweep (all below [`DEFAULT_HOLDOUT`]).
pub const DEFAULT_K_GRID: [usize; 5] = [0, 10, 20, 30, 40];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EvalMode {
    Loo,
    Lpo,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::Loo => "LOO",
            EvalMode::Lpo => "LPO",
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "loo" => Ok(EvalMode::Loo),
            "lpo" => Ok(EvalMode::Lpo),
            _ => Err(Error::InvalidParameter(format!("unknown evaluation mode '{s}' (expected loo or lpo)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSpec {
    pub target_rumour: String,
    pub mode: EvalMode,
    /// Target tweets added to training (always 0 for LOO).
    pub k: usize,
    /// First test `seq_index` for LPO; unused (0) for LOO.
    pub l: usize,
}

/// One fold per rumour, in rumour order.
pub fn make_folds(corpus: &Corpus, mode: EvalMode, k: usize, l: usize) -> Result<Vec<FoldSpec>> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("corpus has no rumours".into()));
    }
    let l = match mode {
        EvalMode::Loo => {
            if k != 0 {
                return Err(Error::InvalidParameter(format!("LOO folds take no target tweets (k = {k})")));
            }
            0
        }
        EvalMode::Lpo => {
            if k >= l {
                return Err(Error::InvalidParameter(format!("LPO needs k < l (k = {k}, l = {l})")));
            }
            if let Some((r, recs)) = corpus.iter().find(|(_, recs)| recs.len() <= l) {
                return Err(Error::InvalidInput(format!(
                    "rumour '{r}' has {} tweets; LPO with l = {l} needs more than {l}",
                    recs.len()
                )));
            }
            l
        }
    };
    Ok(corpus
        .rumour_ids()
        .map(|r| FoldSpec {
            target_rumour: r.to_string(),
            mode,
            k,
            l,
        })
        .collect())
}

/// Materialized training and test records of a fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldSplit {
    pub train: Vec<TweetRecord>,
    pub test: Vec<TweetRecord>,
}

pub fn split_fold(corpus: &Corpus, fold: &FoldSpec, pre: &Preprocessor) -> Result<FoldSplit> {
    let target = corpus
        .records(&fold.target_rumour)
        .ok_or_else(|| Error::InvalidInput(format!("rumour '{}' is not in the corpus", fold.target_rumour)))?;
    let mut train = Vec::new();
    for (r, recs) in corpus.iter() {
        if r != fold.target_rumour {
            train.extend_from_slice(recs);
        }
    }
    let (prefix, test) = match fold.mode {
        EvalMode::Loo => (&target[..0], target),
        EvalMode::Lpo => {
            if fold.k >= fold.l || target.len() <= fold.l {
                return Err(Error::InvalidInput(format!(
                    "rumour '{}' is too small for k = {}, l = {}",
                    fold.target_rumour, fold.k, fold.l
                )));
            }
            (&target[..fold.k], &target[fold.l..])
        }
    };
    train.extend_from_slice(prefix);
    Ok(FoldSplit {
        train: filter_retweets(&train, pre),
        test: test.to_vec(),
    })
}

/// Most frequent label; ties go to the lowest code.
pub fn majority_label<'a>(records: impl IntoIterator<Item = &'a TweetRecord>) -> StanceLabel {
    let mut counts = [0usize; 3];
    for r in records {
        counts[r.label.code()] += 1;
    }
    let mut best = 0;
    for c in 1..3 {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    StanceLabel::from_code(best).expect("three labels")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub tweet_id: String,
    pub gold: StanceLabel,
    pub predicted: StanceLabel,
    /// Absent for the majority baseline.
    pub posterior: Option<ClassPosterior>,
}

/// Test-set predictions of one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub rumour_id: String,
    pub predictions: Vec<Prediction>,
}

impl FoldOutcome {
    pub fn n_test(&self) -> usize {
        self.predictions.len()
    }

    pub fn n_correct(&self) -> usize {
        self.predictions.iter().filter(|p| p.gold == p.predicted).count()
    }

    pub fn accuracy(&self) -> f64 {
        if self.predictions.is_empty() {
            return 0.0;
        }
        self.n_correct() as f64 / self.n_test() as f64
    }
}

pub fn majority_baseline(corpus: &Corpus, fold: &FoldSpec, pre: &Preprocessor) -> Result<FoldOutcome> {
    let split = split_fold(corpus, fold, pre)?;
    let label = majority_label(&split.train);
    Ok(FoldOutcome {
        rumour_id: fold.target_rumour.clone(),
        predictions: split
            .test
            .iter()
            .map(|r| Prediction {
                tweet_id: r.tweet_id.clone(),
                gold: r.label,
                predicted: label,
                posterior: None,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelVariant {
    /// Target-rumour prefix only.
    Gp,
    /// All training tweets as one task.
    GpPooled,
    /// All training tweets, one task per rumour.
    GpIcm,
    Majority,
}

impl ModelVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Gp => "GP",
            ModelVariant::GpPooled => "GPPooled",
            ModelVariant::GpIcm => "GPICM",
            ModelVariant::Majority => "Majority",
        }
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gp" => Ok(ModelVariant::Gp),
            "gppooled" | "pooled" => Ok(ModelVariant::GpPooled),
            "gpicm" | "icm" => Ok(ModelVariant::GpIcm),
            "majority" => Ok(ModelVariant::Majority),
            _ => Err(Error::InvalidParameter(format!(
                "unknown model variant '{s}' (expected GP, GPPooled, GPICM or Majority)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Bow,
    Brown,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Bow => "BOW",
            FeatureKind::Brown => "Brown",
        }
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bow" => Ok(FeatureKind::Bow),
            "brown" => Ok(FeatureKind::Brown),
            _ => Err(Error::InvalidParameter(format!("unknown feature kind '{s}' (expected BOW or Brown)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodSpec {
    pub variant: ModelVariant,
    pub features: FeatureKind,
}

impl MethodSpec {
    pub fn new(variant: ModelVariant, features: FeatureKind) -> Self {
        Self { variant, features }
    }

    /// GP needs target tweets (k >= 1); GPICM additionally needs LPO.
    pub fn check(&self, mode: EvalMode, k: usize) -> Result<()> {
        let ok = match self.variant {
            ModelVariant::Gp => k >= 1,
            ModelVariant::GpIcm => mode == EvalMode::Lpo && k >= 1,
            ModelVariant::GpPooled | ModelVariant::Majority => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{} cannot run with mode {mode} and k = {k}",
                self.variant.as_str()
            )))
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.variant.as_str(), self.features.as_str())
    }
}

/// Text resources shared by every fold.
#[derive(Debug)]
pub struct Resources {
    pub pre: Preprocessor,
    pub lexicon: Option<BrownLexicon>,
}

impl Resources {
    pub fn new(pre: Preprocessor, lexicon: Option<BrownLexicon>) -> Self {
        Self { pre, lexicon }
    }
}

/// Feature space fitted on training tokens only: the vocabulary of the
/// training set, or the lexicon restricted to clusters seen in training.
pub fn fit_feature_space(kind: FeatureKind, train: &[TokenSequence], res: &Resources) -> Result<FeatureSpace> {
    match kind {
        FeatureKind::Bow => Ok(FeatureSpace::Bow(build_vocabulary(train))),
        FeatureKind::Brown => {
            let lex = res
                .lexicon
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("Brown features need a cluster lexicon".into()))?;
            Ok(FeatureSpace::Brown(lex.restrict_to_seen(train)))
        }
    }
}

/// Trains a one-vs-all model on `train`. GPICM assigns one task per rumour
/// (in lexicographic order); the other variants pool everything into task 0.
pub fn train_on_records(
    train: &[&TweetRecord],
    variant: ModelVariant,
    features: FeatureKind,
    ard: bool,
    res: &Resources,
    cfg: &TrainConfig,
) -> Result<OneVsAllModel> {
    if variant == ModelVariant::Majority {
        return Err(Error::InvalidParameter("the majority baseline has no model to train".into()));
    }
    if train.is_empty() {
        return Err(Error::InvalidInput("no training tweets".into()));
    }
    let tokens: Vec<TokenSequence> = train.iter().map(|r| res.pre.preprocess(&r.text)).collect();
    let space = fit_feature_space(features, &tokens, res)?;

    let (family, task_map) = if variant == ModelVariant::GpIcm {
        let mut task_map: BTreeMap<String, usize> = train.iter().map(|r| (r.rumour_id.clone(), 0)).collect();
        for (i, v) in task_map.values_mut().enumerate() {
            *v = i;
        }
        (KernelFamily::Icm { tasks: task_map.len(), ard }, task_map)
    } else {
        (KernelFamily::Linear { ard }, BTreeMap::new())
    };
    let examples: Vec<TrainExample> = train
        .iter()
        .zip(&tokens)
        .map(|(r, t)| TrainExample {
            x: space.featurize(t),
            task: task_map.get(&r.rumour_id).copied().unwrap_or(0),
            label: r.label,
        })
        .collect();
    train_ova(&examples, space, family, task_map, cfg)
}

/// Trains the model for one fold; returns it with the target's task index.
pub fn train_fold(
    split: &FoldSplit,
    fold: &FoldSpec,
    variant: ModelVariant,
    features: FeatureKind,
    ard: bool,
    res: &Resources,
    cfg: &TrainConfig,
) -> Result<(OneVsAllModel, usize)> {
    let train: Vec<&TweetRecord> = match variant {
        ModelVariant::Gp => split.train.iter().filter(|r| r.rumour_id == fold.target_rumour).collect(),
        _ => split.train.iter().collect(),
    };
    if train.is_empty() {
        return Err(Error::InvalidInput(format!(
            "fold '{}' has no training tweets for {}",
            fold.target_rumour,
            variant.as_str()
        )));
    }
    let model = train_on_records(&train, variant, features, ard, res, cfg)?;
    let task = model.task_for(&fold.target_rumour)?;
    Ok((model, task))
}

/// Trains `method` on the fold's training side and classifies its test set.
pub fn run_method(corpus: &Corpus, fold: &FoldSpec, method: MethodSpec, res: &Resources, cfg: &TrainConfig) -> Result<FoldOutcome> {
    method.check(fold.mode, fold.k)?;
    if method.variant == ModelVariant::Majority {
        return majority_baseline(corpus, fold, &res.pre);
    }
    let split = split_fold(corpus, fold, &res.pre)?;
    let (model, task) = train_fold(&split, fold, method.variant, method.features, false, res, cfg)?;
    let predictions = split
        .test
        .iter()
        .map(|r| {
            let x = model.feature_space.featurize(&res.pre.preprocess(&r.text));
            let (predicted, posterior) = classify(&model, &x, task)?;
            Ok(Prediction {
                tweet_id: r.tweet_id.clone(),
                gold: r.label,
                predicted,
                posterior: Some(posterior),
            })
        })
        .collect::<Result<_>>()?;
    Ok(FoldOutcome {
        rumour_id: fold.target_rumour.clone(),
        predictions,
    })
}

/// Accuracy of one method over all folds of one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub method: MethodSpec,
    pub mode: EvalMode,
    pub k: usize,
    pub l: usize,
    pub per_rumour_accuracy: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, usize>,
    /// Unweighted mean of `per_rumour_accuracy`.
    pub macro_accuracy: f64,
    pub outcomes: Vec<FoldOutcome>,
}

impl EvalResult {
    pub fn from_outcomes(method: MethodSpec, mode: EvalMode, k: usize, l: usize, outcomes: Vec<FoldOutcome>) -> Self {
        let per_rumour_accuracy: BTreeMap<String, f64> = outcomes.iter().map(|o| (o.rumour_id.clone(), o.accuracy())).collect();
        let counts = outcomes.iter().map(|o| (o.rumour_id.clone(), o.n_test())).collect();
        let macro_accuracy = if per_rumour_accuracy.is_empty() {
            0.0
        } else {
            per_rumour_accuracy.values().sum::<f64>() / per_rumour_accuracy.len() as f64
        };
        Self {
            method,
            mode,
            k,
            l,
            per_rumour_accuracy,
            counts,
            macro_accuracy,
            outcomes,
        }
    }
}

/// Runs `method` on every fold of the given setting.
pub fn evaluate(
    corpus: &Corpus,
    method: MethodSpec,
    mode: EvalMode,
    k: usize,
    l: usize,
    res: &Resources,
    cfg: &TrainConfig,
) -> Result<EvalResult> {
    method.check(mode, k)?;
    let folds = make_folds(corpus, mode, k, l)?;
    let outcomes = folds
        .iter()
        .map(|f| run_method(corpus, f, method, res, cfg))
        .collect::<Result<Vec<_>>>()?;
    let l = folds.first().map_or(l, |f| f.l);
    Ok(EvalResult::from_outcomes(method, mode, k, l, outcomes))
}

/// LPO accuracy for each `k` on the fixed test split `seq_index >= l`.
/// GPICM at `k = 0` has no target task, so that point is evaluated with
/// GPPooled (recorded in the row's method).
pub fn run_sweep(
    corpus: &Corpus,
    method: MethodSpec,
    k_values: &[usize],
    l: usize,
    res: &Resources,
    cfg: &TrainConfig,
) -> Result<Vec<EvalResult>> {
    if let Some(&k) = k_values.iter().find(|&&k| k >= l) {
        return Err(Error::InvalidParameter(format!("sweep needs every k < l (k = {k}, l = {l})")));
    }
    k_values
        .iter()
        .map(|&k| {
            let m = if method.variant == ModelVariant::GpIcm && k == 0 {
                MethodSpec::new(ModelVariant::GpPooled, method.features)
            } else {
                method
            };
            evaluate(corpus, m, EvalMode::Lpo, k, l, res, cfg)
        })
        .collect()
}

/// Per-rumour rows plus one `MACRO` row per result.
pub fn results_tsv(results: &[EvalResult]) -> String {
    let mut out = String::from("method\tfeatures\tmode\tk\trumour_id\tn_test\taccuracy\n");
    for r in results {
        let prefix = format!("{}\t{}\t{}\t{}", r.method.variant.as_str(), r.method.features.as_str(), r.mode, r.k);
        for (rumour, acc) in &r.per_rumour_accuracy {
            let _ = writeln!(out, "{prefix}\t{rumour}\t{}\t{acc:.6}", r.counts[rumour]);
        }
        let total: usize = r.counts.values().sum();
        let _ = writeln!(out, "{prefix}\tMACRO\t{total}\t{:.6}", r.macro_accuracy);
    }
    out
}

/// `(k, macro_accuracy)` rows, one block per method.
pub fn sweep_tsv(rows: &[EvalResult]) -> String {
    let mut out = String::from("method\tfeatures\tk\tmacro_accuracy\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.6}",
            r.method.variant.as_str(),
            r.method.features.as_str(),
            r.k,
            r.macro_accuracy
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArdEntry {
    pub bitstring: String,
    /// Most frequent member word of the cluster.
    pub word: String,
    /// Mean learned ARD variance over the folds that used the cluster.
    pub weight: f64,
    pub folds: usize,
}

/// Top clusters per label, columns ordered supporting, denying, questioning.
#[derive(Debug, Clone, PartialEq)]
pub struct ArdReport {
    pub columns: [Vec<ArdEntry>; 3],
}

impl ArdReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("rank");
        for label in StanceLabel::ALL {
            let n = label.long_name();
            let _ = write!(out, "\t{n}_word\t{n}_cluster\t{n}_weight");
        }
        out.push('\n');
        let rows = self.columns.iter().map(Vec::len).max().unwrap_or(0);
        for i in 0..rows {
            let _ = write!(out, "{}", i + 1);
            for col in &self.columns {
                match col.get(i) {
                    Some(e) => {
                        let _ = write!(out, "\t{}\t{}\t{:.6}", e.word, e.bitstring, e.weight);
                    }
                    None => out.push_str("\t\t\t"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Averages per-fold weights by key over the folds in which each key occurs.
/// Output is sorted by descending mean weight, ties by key.
pub fn average_weights(per_fold: &[Vec<(String, f64)>]) -> Vec<(String, f64, usize)> {
    let mut acc: HashMap<&str, (f64, usize)> = HashMap::new();
    for fold in per_fold {
        for (key, w) in fold {
            let e = acc.entry(key.as_str()).or_default();
            e.0 += w;
            e.1 += 1;
        }
    }
    let mut out: Vec<(String, f64, usize)> = acc.into_iter().map(|(k, (s, n))| (k.to_string(), s / n as f64, n)).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Trains GPICM with ARD on Brown features for every LPO fold and reports
/// the `top_n` clusters per label by fold-averaged ARD variance.
pub fn ard_report(corpus: &Corpus, k: usize, l: usize, top_n: usize, res: &Resources, cfg: &TrainConfig) -> Result<ArdReport> {
    let lexicon = res
        .lexicon
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("the ARD report needs a Brown cluster lexicon".into()))?;
    MethodSpec::new(ModelVariant::GpIcm, FeatureKind::Brown).check(EvalMode::Lpo, k)?;
    let folds = make_folds(corpus, EvalMode::Lpo, k, l)?;
    let mut per_label: [Vec<Vec<(String, f64)>>; 3] = Default::default();
    for fold in &folds {
        let split = split_fold(corpus, fold, &res.pre)?;
        let (model, _) = train_fold(&split, fold, ModelVariant::GpIcm, FeatureKind::Brown, true, res, cfg)?;
        for (c, ranked) in ard_relevance(&model)?.into_iter().enumerate() {
            per_label[c].push(ranked.into_iter().map(|f| (f.key, f.weight)).collect());
        }
    }
    let columns = per_label.map(|folds| {
        average_weights(&folds)
            .into_iter()
            .take(top_n)
            .map(|(bitstring, weight, n)| ArdEntry {
                word: lexicon
                    .cluster_id(&bitstring)
                    .and_then(|i| lexicon.representative_word(i))
                    .unwrap_or_default()
                    .to_string(),
                bitstring,
                weight,
                folds: n,
            })
            .collect()
    });
    Ok(ArdReport { columns })
}
