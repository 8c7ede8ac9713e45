use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use stance_gp::experiments::synthetic::{generate, SyntheticConfig};
use stance_gp::experiments::*;
use stance_gp::kernels::{CoregionalizationParams, KernelParams, LinearKernelParams};
use stance_gp::multiclass::{classify, Hyperparameters, TrainConfig};
use stance_gp::textproc::{Preprocessor, StanceLabel, TweetRecord};
use stance_gp::{EpConfig, OptimizerConfig};

fn quick_cfg() -> TrainConfig {
    TrainConfig {
        hyper: Hyperparameters::Optimize(OptimizerConfig {
            restarts: 1,
            max_evals: 15,
            ..Default::default()
        }),
        ep: EpConfig::default(),
    }
}

fn small_synthetic(seed: u64) -> (Corpus, Resources) {
    let data = generate(&SyntheticConfig {
        tweets_per_task: 56,
        seed,
        ..Default::default()
    })
    .unwrap();
    (data.corpus, Resources::new(Preprocessor::bundled(), Some(data.lexicon)))
}

#[test]
fn folds_partition_by_tweet_id() {
    let (corpus, res) = small_synthetic(1);
    for (mode, k) in [(EvalMode::Loo, 0), (EvalMode::Lpo, 0), (EvalMode::Lpo, 10)] {
        for fold in make_folds(&corpus, mode, k, 50).unwrap() {
            let split = split_fold(&corpus, &fold, &res.pre).unwrap();
            let train: HashSet<(&str, &str)> = split.train.iter().map(|r| (r.rumour_id.as_str(), r.tweet_id.as_str())).collect();
            assert!(split.test.iter().all(|r| !train.contains(&(r.rumour_id.as_str(), r.tweet_id.as_str()))));
            assert!(split.test.iter().all(|r| r.rumour_id == fold.target_rumour));
        }
    }
}

#[test]
fn retweets_are_filtered_from_training_only() {
    let text = "1\tzoo\t0\tsupport\tlions loose\n\
                2\tzoo\t1\tsupport\tRT @x: lions loose\n\
                3\tzoo\t2\tdeny\tnot true\n\
                4\tbank\t0\tsupport\tarmy at bank\n\
                5\tbank\t1\tsupport\tRT @y: army at bank\n";
    let corpus = Corpus::parse(text, "t").unwrap();
    let pre = Preprocessor::bundled();
    let folds = make_folds(&corpus, EvalMode::Loo, 0, 0).unwrap();
    let bank = split_fold(&corpus, &folds[0], &pre).unwrap();
    assert_eq!(bank.test.len(), 2);
    assert_eq!(bank.train.iter().map(|r| r.tweet_id.as_str()).collect::<Vec<_>>(), ["1", "3"]);
}

#[test]
fn feature_spaces_see_training_data_only() {
    let text = "1\tzoo\t0\tsupport\tlions loose\n\
                2\tzoo\t1\tdeny\tnot true\n\
                3\tzoo\t2\tquestion\tunicorn sighting?\n\
                4\tbank\t0\tsupport\tarmy bank\n\
                5\tbank\t1\tdeny\tfake\n";
    let corpus = Corpus::parse(text, "t").unwrap();
    let res = Resources::new(Preprocessor::bundled(), None);
    let fold = FoldSpec {
        target_rumour: "zoo".into(),
        mode: EvalMode::Lpo,
        k: 1,
        l: 2,
    };
    let split = split_fold(&corpus, &fold, &res.pre).unwrap();
    let cfg = TrainConfig {
        hyper: Hyperparameters::Fixed(KernelParams::linear(1.0)),
        ep: EpConfig::default(),
    };
    let (model, _) = train_fold(&split, &fold, ModelVariant::GpPooled, FeatureKind::Bow, false, &res, &cfg).unwrap();
    let keys = model.feature_space.feature_keys();
    assert!(!keys.iter().any(|k| k == "unicorn" || k == "not"));
    let x = model.feature_space.featurize(&res.pre.preprocess("unicorn"));
    assert_eq!(x.nnz(), 0);
}

#[test]
fn pooled_equals_single_task_icm_with_fixed_hyperparameters() {
    let (corpus, res) = small_synthetic(2);
    let fold = make_folds(&corpus, EvalMode::Lpo, 10, 50).unwrap().remove(0);
    let split = split_fold(&corpus, &fold, &res.pre).unwrap();
    let train: Vec<&TweetRecord> = split.train.iter().collect();

    let pooled_cfg = TrainConfig {
        hyper: Hyperparameters::Fixed(KernelParams::linear(2.0)),
        ep: EpConfig::default(),
    };
    let pooled = train_on_records(&train, ModelVariant::GpPooled, FeatureKind::Brown, false, &res, &pooled_cfg).unwrap();

    let relabelled: Vec<TweetRecord> = split.train.iter().map(|r| TweetRecord { rumour_id: "all".into(), ..r.clone() }).collect();
    let relabelled: Vec<&TweetRecord> = relabelled.iter().collect();
    let icm_cfg = TrainConfig {
        hyper: Hyperparameters::Fixed(KernelParams {
            data: LinearKernelParams::new(1.0),
            coreg: Some(CoregionalizationParams::new(vec![1.0], vec![1.0]).unwrap()),
        }),
        ep: EpConfig::default(),
    };
    let icm = train_on_records(&relabelled, ModelVariant::GpIcm, FeatureKind::Brown, false, &res, &icm_cfg).unwrap();

    for r in &split.test {
        let tokens = res.pre.preprocess(&r.text);
        let a = classify(&pooled, &pooled.feature_space.featurize(&tokens), 0).unwrap();
        let b = classify(&icm, &icm.feature_space.featurize(&tokens), 0).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn results_are_deterministic() {
    let (corpus, res) = small_synthetic(3);
    let m = MethodSpec::new(ModelVariant::GpIcm, FeatureKind::Brown);
    let a = evaluate(&corpus, m, EvalMode::Lpo, 10, 50, &res, &quick_cfg()).unwrap();
    let b = evaluate(&corpus, m, EvalMode::Lpo, 10, 50, &res, &quick_cfg()).unwrap();
    assert_eq!(results_tsv(&[a.clone()]), results_tsv(&[b]));
    let mean = a.per_rumour_accuracy.values().sum::<f64>() / a.per_rumour_accuracy.len() as f64;
    assert_eq!(a.macro_accuracy, mean);
    assert_eq!(a.counts.values().copied().collect::<Vec<_>>(), vec![6, 6, 6]);
}

#[test]
fn sweep_has_one_row_per_k() {
    let (corpus, res) = small_synthetic(4);
    let m = MethodSpec::new(ModelVariant::GpIcm, FeatureKind::Bow);
    let rows = run_sweep(&corpus, m, &[0, 5], 50, &res, &quick_cfg()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].method.variant, ModelVariant::GpPooled);
    assert_eq!(rows[1].method.variant, ModelVariant::GpIcm);
    assert_eq!(sweep_tsv(&rows).lines().count(), 3);
    assert!(run_sweep(&corpus, m, &[50], 50, &res, &quick_cfg()).is_err());
}

#[test]
fn pooled_k0_sweep_matches_lpo_evaluation() {
    let (corpus, res) = small_synthetic(5);
    let m = MethodSpec::new(ModelVariant::GpPooled, FeatureKind::Brown);
    let rows = run_sweep(&corpus, m, &[0], 50, &res, &quick_cfg()).unwrap();
    let direct = evaluate(&corpus, m, EvalMode::Lpo, 0, 50, &res, &quick_cfg()).unwrap();
    assert_eq!(rows[0], direct);
}

#[test]
fn incompatible_methods_are_rejected() {
    let (corpus, res) = small_synthetic(6);
    let icm = MethodSpec::new(ModelVariant::GpIcm, FeatureKind::Bow);
    assert!(evaluate(&corpus, icm, EvalMode::Loo, 0, 50, &res, &quick_cfg()).is_err());
    let no_lexicon = Resources::new(Preprocessor::bundled(), None);
    let brown = MethodSpec::new(ModelVariant::GpPooled, FeatureKind::Brown);
    assert!(evaluate(&corpus, brown, EvalMode::Loo, 0, 50, &no_lexicon, &quick_cfg()).is_err());
}

#[test]
fn ard_report_layout() {
    let data = generate(&SyntheticConfig {
        tasks: 2,
        tweets_per_task: 55,
        class_weights: Some([0.4, 0.4, 0.2]),
        shared_clusters_per_class: 1,
        neutral_clusters: 2,
        marker: Some(StanceLabel::Denying),
        seed: 7,
        ..Default::default()
    })
    .unwrap();
    let res = Resources::new(Preprocessor::bundled(), Some(data.lexicon));
    let cfg = TrainConfig {
        hyper: Hyperparameters::Optimize(OptimizerConfig {
            restarts: 1,
            max_evals: 15,
            ard_evals_per_coord: 4,
            ..Default::default()
        }),
        ep: EpConfig::default(),
    };
    let report = ard_report(&data.corpus, 10, 50, 5, &res, &cfg).unwrap();
    let tsv = report.to_tsv();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0].split('\t').count(), 10);
    for col in &report.columns {
        assert_eq!(col.len(), 5);
        assert!(col.windows(2).all(|w| w[0].weight >= w[1].weight));
        assert!(col.iter().all(|e| !e.word.is_empty() && e.bitstring.chars().all(|c| c == '0' || c == '1')));
    }
}

#[test]
fn ingest_from_file_with_count_report() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "tweet_id\trumour_id\tseq_index\tlabel\ttext").unwrap();
    writeln!(f, "a\tzoo\t0\tsupport\tlions loose").unwrap();
    writeln!(f, "b\tzoo\t1\tquestion\treally?").unwrap();
    writeln!(f, "c\tzoo\t2\tsupport\tsaw them").unwrap();
    let corpus = Corpus::ingest(f.path()).unwrap();
    assert_eq!(corpus.len(), 3);
    let counts: BTreeMap<&str, [usize; 3]> = corpus.label_counts();
    assert_eq!(counts["zoo"], [2, 0, 1]);
    assert!(Corpus::ingest(std::path::Path::new("/nonexistent/corpus.tsv")).is_err());
}

#[test]
fn majority_macro_on_riots_counts() {
    let corpus = Corpus::riots_fixture();
    let res = Resources::new(Preprocessor::bundled(), None);
    let method = MethodSpec::new(ModelVariant::Majority, FeatureKind::Bow);
    let r = evaluate(&corpus, method, EvalMode::Loo, 0, 0, &res, &quick_cfg()).unwrap();
    assert!((r.macro_accuracy - 0.6773).abs() <= 0.0005, "{}", r.macro_accuracy);
    // Every LOO fold predicts support, so each rumour scores its support share.
    let expected: f64 = Corpus::riots_counts()
        .iter()
        .map(|(_, [s, d, q])| *s as f64 / (s + d + q) as f64)
        .sum::<f64>()
        / 7.0;
    assert!((r.macro_accuracy - expected).abs() < 1e-12);
}
