use std::collections::{BTreeMap, HashMap};

use super::{BrownLexicon, TokenSequence};
use crate::error::{Error, Result};

/// Sparse nonnegative feature vector with strictly increasing indices and no
/// stored zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseFeatureVector {
    dims: usize,
    pairs: Vec<(usize, f64)>,
}

impl SparseFeatureVector {
    pub fn zeros(dims: usize) -> Self {
        Self { dims, pairs: Vec::new() }
    }

    /// Builds a vector from `(index, value)` pairs given in strictly increasing
    /// index order. Zero values are dropped.
    pub fn from_pairs(dims: usize, pairs: Vec<(usize, f64)>) -> Result<Self> {
        let mut prev: Option<usize> = None;
        for &(i, v) in &pairs {
            if i >= dims {
                return Err(Error::InvalidInput(format!("feature index {i} >= dims {dims}")));
            }
            if prev.is_some_and(|p| p >= i) {
                return Err(Error::InvalidInput("feature indices must be strictly increasing".into()));
            }
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("feature value {v} at index {i} is not a finite nonnegative number")));
            }
            prev = Some(i);
        }
        Ok(Self {
            dims,
            pairs: pairs.into_iter().filter(|&(_, v)| v != 0.0).collect(),
        })
    }

    pub fn from_dense(values: &[f64]) -> Result<Self> {
        let pairs = values.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect();
        Self::from_pairs(values.len(), pairs)
    }

    fn from_counts(dims: usize, counts: BTreeMap<usize, u32>) -> Self {
        Self {
            dims,
            pairs: counts.into_iter().map(|(i, c)| (i, f64::from(c))).collect(),
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn pairs(&self) -> &[(usize, f64)] {
        &self.pairs
    }

    pub fn nnz(&self) -> usize {
        self.pairs.len()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.pairs
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |pos| self.pairs[pos].1)
    }

    pub fn l1_norm(&self) -> f64 {
        self.pairs.iter().map(|&(_, v)| v).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dims];
        for &(i, v) in &self.pairs {
            out[i] = v;
        }
        out
    }

    /// Inner product, optionally with per-feature weights.
    pub(crate) fn weighted_dot(&self, other: &Self, weights: Option<&[f64]>) -> f64 {
        let (a, b) = (&self.pairs, &other.pairs);
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let w = weights.map_or(1.0, |w| w[a[i].0]);
                    acc += w * a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.weighted_dot(other, None)
    }
}

/// Dense, 0-based token indices assigned in first-occurrence order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::default();
        for t in tokens {
            vocab.insert(t.into());
        }
        vocab
    }

    fn insert(&mut self, token: String) {
        if !self.index.contains_key(&token) {
            self.index.insert(token.clone(), self.tokens.len());
            self.tokens.push(token);
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    /// Tokens in index order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

pub fn build_vocabulary<'a, I>(token_seqs: I) -> Vocabulary
where
    I: IntoIterator<Item = &'a TokenSequence>,
{
    Vocabulary::from_tokens(token_seqs.into_iter().flat_map(|s| s.tokens.iter().cloned()))
}

/// Raw term counts over `vocab`; out-of-vocabulary tokens are dropped.
pub fn featurize_bow(tokens: &TokenSequence, vocab: &Vocabulary) -> SparseFeatureVector {
    let mut counts = BTreeMap::new();
    for idx in tokens.iter().filter_map(|t| vocab.get(t)) {
        *counts.entry(idx).or_insert(0u32) += 1;
    }
    SparseFeatureVector::from_counts(vocab.len(), counts)
}

/// Counts of Brown clusters; tokens missing from the lexicon are dropped.
pub fn featurize_brown(tokens: &TokenSequence, lexicon: &BrownLexicon) -> SparseFeatureVector {
    let mut counts = BTreeMap::new();
    for idx in tokens.iter().filter_map(|t| lexicon.cluster_of(t)) {
        *counts.entry(idx).or_insert(0u32) += 1;
    }
    SparseFeatureVector::from_counts(lexicon.num_clusters(), counts)
}
