//! Seeded generator of multi-rumour corpora for transfer experiments.
//!
//! Every rumour draws its label proportions from one row of the bundled
//! riots counts (add-one smoothed) unless fixed weights are given. Tweets mix three kinds of token:
//!
//! * a topic word unique to the rumour, present in every tweet;
//! * stance cues, either shared by all rumours or specific to one rumour,
//!   drawn from the tweet's own class with probability `cue_purity`;
//! * neutral filler words.
//!
//! Optionally a marker word is planted in a fraction of one class's tweets.
//! All words contain digits, so the preprocessor leaves them unchanged, and
//! the generated lexicon gives each word group its own Brown cluster.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Corpus;
use crate::error::{Error, Result};
use crate::textproc::{BrownLexicon, StanceLabel, TweetRecord};

pub const MARKER_WORD: &str = "m4rk";
const SHARED_CUES_PER_CLUSTER: usize = 3;
const TASK_CUES_PER_CLASS: usize = 3;
const NEUTRAL_PER_CLUSTER: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub tasks: usize,
    pub tweets_per_task: usize,
    /// Inclusive range of non-topic tokens per tweet.
    pub tokens_per_tweet: (usize, usize),
    /// Label proportions used by every rumour instead of riots rows.
    pub class_weights: Option<[f64; 3]>,
    pub shared_clusters_per_class: usize,
    pub neutral_clusters: usize,
    pub cue_rate: f64,
    pub shared_cue_fraction: f64,
    pub cue_purity: f64,
    pub marker: Option<StanceLabel>,
    pub marker_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            tasks: 3,
            tweets_per_task: 75,
            tokens_per_tweet: (4, 8),
            class_weights: None,
            shared_clusters_per_class: 4,
            neutral_clusters: 8,
            cue_rate: 0.3,
            shared_cue_fraction: 0.7,
            cue_purity: 0.8,
            marker: None,
            marker_rate: 0.8,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("cue_rate", self.cue_rate)?;
        unit("shared_cue_fraction", self.shared_cue_fraction)?;
        unit("cue_purity", self.cue_purity)?;
        unit("marker_rate", self.marker_rate)?;
        if self.tasks == 0 || self.tweets_per_task == 0 {
            return Err(Error::InvalidParameter("need at least one task and one tweet per task".into()));
        }
        if self.shared_clusters_per_class == 0 || self.neutral_clusters == 0 {
            return Err(Error::InvalidParameter("need at least one shared and one neutral cluster".into()));
        }
        if let Some(w) = self.class_weights {
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidParameter("class weights must be nonnegative with a positive sum".into()));
            }
        }
        if self.tokens_per_tweet.0 > self.tokens_per_tweet.1 {
            return Err(Error::InvalidParameter("tokens_per_tweet range is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: Corpus,
    pub lexicon: BrownLexicon,
}

fn shared_cue(class: usize, cluster: usize, j: usize) -> String {
    format!("s{class}g{cluster}w{j}")
}

fn task_cue(task: usize, class: usize, j: usize) -> String {
    format!("t{task}c{class}w{j}")
}

fn topic(task: usize) -> String {
    format!("topic{task}")
}

fn neutral(cluster: usize, j: usize) -> String {
    format!("n{cluster}w{j}")
}

fn build_lexicon(cfg: &SyntheticConfig) -> Result<BrownLexicon> {
    let mut groups: Vec<Vec<String>> = Vec::new();
    for c in 0..3 {
        for g in 0..cfg.shared_clusters_per_class {
            groups.push((0..SHARED_CUES_PER_CLUSTER).map(|j| shared_cue(c, g, j)).collect());
        }
    }
    for t in 0..cfg.tasks {
        groups.push(vec![topic(t)]);
        for c in 0..3 {
            groups.push((0..TASK_CUES_PER_CLASS).map(|j| task_cue(t, c, j)).collect());
        }
    }
    for g in 0..cfg.neutral_clusters {
        groups.push((0..NEUTRAL_PER_CLUSTER).map(|j| neutral(g, j)).collect());
    }
    groups.push(vec![MARKER_WORD.to_string()]);

    let mut text = String::new();
    for (id, words) in groups.iter().enumerate() {
        let bits = format!("{:b}", id + 2);
        for (j, w) in words.iter().enumerate() {
            let _ = writeln!(text, "{bits}\t{w}\t{}", 100 * (words.len() - j));
        }
    }
    BrownLexicon::parse(&text, "synthetic")
}

fn draw_label(rng: &mut ChaCha8Rng, weights: &[f64; 3]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (c, w) in weights.iter().enumerate() {
        if u < *w {
            return c;
        }
        u -= w;
    }
    2
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rows = Corpus::riots_counts();
    let mut records = Vec::with_capacity(cfg.tasks * cfg.tweets_per_task);
    for t in 0..cfg.tasks {
        let row = rng.random_range(0..rows.len());
        let weights = cfg.class_weights.unwrap_or(rows[row].1.map(|c| c as f64 + 1.0));
        for i in 0..cfg.tweets_per_task {
            let class = draw_label(&mut rng, &weights);
            let mut tokens = vec![topic(t)];
            let n = rng.random_range(cfg.tokens_per_tweet.0..=cfg.tokens_per_tweet.1);
            for _ in 0..n {
                if rng.random::<f64>() < cfg.cue_rate {
                    let cue_class = if rng.random::<f64>() < cfg.cue_purity {
                        class
                    } else {
                        (class + rng.random_range(1..3)) % 3
                    };
                    let word = if rng.random::<f64>() < cfg.shared_cue_fraction {
                        shared_cue(
                            cue_class,
                            rng.random_range(0..cfg.shared_clusters_per_class),
                            rng.random_range(0..SHARED_CUES_PER_CLUSTER),
                        )
                    } else {
                        task_cue(t, cue_class, rng.random_range(0..TASK_CUES_PER_CLASS))
                    };
                    tokens.push(word);
                } else {
                    tokens.push(neutral(
                        rng.random_range(0..cfg.neutral_clusters),
                        rng.random_range(0..NEUTRAL_PER_CLUSTER),
                    ));
                }
            }
            if cfg.marker.map(StanceLabel::code) == Some(class) && rng.random::<f64>() < cfg.marker_rate {
                let at = rng.random_range(0..=tokens.len());
                tokens.insert(at, MARKER_WORD.to_string());
            }
            records.push(TweetRecord {
                tweet_id: format!("r{t}t{i}"),
                rumour_id: format!("rumour{t}"),
                seq_index: i,
                text: tokens.join(" "),
                label: StanceLabel::from_code(class).expect("three labels"),
            });
        }
    }
    Ok(SyntheticData {
        corpus: Corpus::from_records(records)?,
        lexicon: build_lexicon(cfg)?,
    })
}
