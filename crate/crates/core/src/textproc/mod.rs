//! Tweet normalization and sparse featurization.
//!
//! Raw text goes through [`Preprocessor`] to become a [`TokenSequence`], which is
//! then turned into a [`SparseFeatureVector`] either over a fitted [`Vocabulary`]
//! (bag of words) or over the clusters of a [`BrownLexicon`].

mod brown;
mod features;
mod pipeline;

use std::fmt;
use std::str::FromStr;

pub use brown::{load_brown_lexicon, BrownLexicon};
pub use features::{build_vocabulary, featurize_bow, featurize_brown, SparseFeatureVector, Vocabulary};
pub use pipeline::{squash_repeats, Preprocessor, PUNCTUATION};

use crate::error::Error;

/// Stance of a tweet towards its rumour. The integer codes are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum StanceLabel {
    Supporting = 0,
    Denying = 1,
    Questioning = 2,
}

impl StanceLabel {
    pub const ALL: [StanceLabel; 3] = [StanceLabel::Supporting, StanceLabel::Denying, StanceLabel::Questioning];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    /// Short name used in corpus files (`support`, `deny`, `question`).
    pub fn as_str(self) -> &'static str {
        match self {
            StanceLabel::Supporting => "support",
            StanceLabel::Denying => "deny",
            StanceLabel::Questioning => "question",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            StanceLabel::Supporting => "supporting",
            StanceLabel::Denying => "denying",
            StanceLabel::Questioning => "questioning",
        }
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StanceLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "support" | "supporting" => Ok(StanceLabel::Supporting),
            "deny" | "denying" => Ok(StanceLabel::Denying),
            "question" | "questioning" => Ok(StanceLabel::Questioning),
            other => Err(Error::InvalidInput(format!(
                "unknown label '{other}' (expected support, deny or question)"
            ))),
        }
    }
}

/// One message about a rumour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TweetRecord {
    pub tweet_id: String,
    /// Task identity.
    pub rumour_id: String,
    /// 0-based temporal position within the rumour.
    pub seq_index: usize,
    pub text: String,
    pub label: StanceLabel,
}

/// Normalized tokens of one message.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        Self { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Tokens joined by single spaces.
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Drops retweets: any record whose text starts with `RT @` (any case), and any
/// record whose normalized tokens duplicate an earlier (lower `seq_index`)
/// record of the same rumour. Survivors keep their input order.
pub fn filter_retweets(records: &[TweetRecord], pre: &Preprocessor) -> Vec<TweetRecord> {
    use std::collections::{HashMap, HashSet};

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|&i| (records[i].seq_index, i));

    let mut seen: HashMap<&str, HashSet<TokenSequence>> = HashMap::new();
    let mut keep = vec![false; records.len()];
    for i in order {
        let rec = &records[i];
        let tokens = pre.preprocess(&rec.text);
        let fresh = seen.entry(rec.rumour_id.as_str()).or_default().insert(tokens);
        keep[i] = fresh && !is_retweet_prefix(&rec.text);
    }
    records
        .iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then(|| r.clone()))
        .collect()
}

fn is_retweet_prefix(text: &str) -> bool {
    text.get(..4).is_some_and(|p| p.eq_ignore_ascii_case("rt @"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, seq: usize, text: &str) -> TweetRecord {
        TweetRecord {
            tweet_id: id.into(),
            rumour_id: "zoo".into(),
            seq_index: seq,
            text: text.into(),
            label: StanceLabel::Supporting,
        }
    }

    #[test]
    fn label_codes_are_fixed() {
        assert_eq!(StanceLabel::Supporting.code(), 0);
        assert_eq!(StanceLabel::Denying.code(), 1);
        assert_eq!(StanceLabel::Questioning.code(), 2);
        for l in StanceLabel::ALL {
            assert_eq!(StanceLabel::from_code(l.code()), Some(l));
            assert_eq!(l.as_str().parse::<StanceLabel>().unwrap(), l);
        }
        assert!("maybe".parse::<StanceLabel>().is_err());
    }

    #[test]
    fn retweet_prefix_is_removed() {
        let pre = Preprocessor::bundled();
        let out = filter_retweets(&[rec("t1", 0, "fire in zoo"), rec("t2", 1, "RT @a: fire in zoo")], &pre);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].tweet_id, "t1");
        let out = filter_retweets(&[rec("t1", 0, "rt @a: lions loose")], &pre);
        assert!(out.is_empty());
    }

    #[test]
    fn empty_input() {
        assert!(filter_retweets(&[], &Preprocessor::bundled()).is_empty());
    }

    #[test]
    fn normalized_duplicates_are_removed() {
        let pre = Preprocessor::bundled();
        let out = filter_retweets(&[rec("t1", 0, "fake!"), rec("t2", 1, "Fake !")], &pre);
        assert_eq!(out.iter().map(|r| r.tweet_id.as_str()).collect::<Vec<_>>(), ["t1"]);
    }

    #[test]
    fn earliness_follows_seq_index_not_input_order() {
        let pre = Preprocessor::bundled();
        let out = filter_retweets(&[rec("late", 5, "Fake !"), rec("early", 2, "fake!")], &pre);
        assert_eq!(out.iter().map(|r| r.tweet_id.as_str()).collect::<Vec<_>>(), ["early"]);
    }

    #[test]
    fn duplicates_in_other_rumours_survive() {
        let pre = Preprocessor::bundled();
        let mut b = rec("t2", 1, "fake!");
        b.rumour_id = "hospital".into();
        let out = filter_retweets(&[rec("t1", 0, "fake!"), b], &pre);
        assert_eq!(out.len(), 2);
    }
}
