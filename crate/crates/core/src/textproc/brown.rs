use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use super::TokenSequence;
use crate::error::{Error, Result};

/// Word → Brown cluster mapping with a dense index over clusters.
///
/// Clusters are indexed in first-occurrence order of their bitstrings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BrownLexicon {
    words: HashMap<String, (usize, u64)>,
    clusters: Vec<String>,
    cluster_index: HashMap<String, usize>,
    representatives: Vec<(String, u64)>,
}

impl BrownLexicon {
    /// Parses `bitstring<TAB>word<TAB>count` lines. Blank lines are skipped; a
    /// word listed twice keeps its first cluster.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut lex = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [bits, word, count] = fields[..] else {
                return Err(Error::parse(source, i + 1, "expected 'bitstring<TAB>word<TAB>count'"));
            };
            if bits.is_empty() || !bits.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(Error::parse(source, i + 1, format!("cluster id '{bits}' is not a binary string")));
            }
            if word.is_empty() {
                return Err(Error::parse(source, i + 1, "empty word"));
            }
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| Error::parse(source, i + 1, format!("count '{count}' is not a nonnegative integer")))?;
            lex.add(bits, word, count);
        }
        Ok(lex)
    }

    fn add(&mut self, bits: &str, word: &str, count: u64) {
        if self.words.contains_key(word) {
            return;
        }
        let idx = match self.cluster_index.get(bits) {
            Some(&idx) => idx,
            None => {
                let idx = self.clusters.len();
                self.clusters.push(bits.to_string());
                self.cluster_index.insert(bits.to_string(), idx);
                self.representatives.push((word.to_string(), count));
                idx
            }
        };
        let rep = &mut self.representatives[idx];
        if count > rep.1 || (count == rep.1 && word < rep.0.as_str()) {
            *rep = (word.to_string(), count);
        }
        self.words.insert(word.to_string(), (idx, count));
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Cluster bitstring of `word`.
    pub fn bitstring_of(&self, word: &str) -> Option<&str> {
        self.words.get(word).map(|&(idx, _)| self.clusters[idx].as_str())
    }

    /// Feature index of the cluster containing `word`.
    pub fn cluster_of(&self, word: &str) -> Option<usize> {
        self.words.get(word).map(|&(idx, _)| idx)
    }

    pub fn cluster_id(&self, bits: &str) -> Option<usize> {
        self.cluster_index.get(bits).copied()
    }

    pub fn bitstring(&self, index: usize) -> Option<&str> {
        self.clusters.get(index).map(String::as_str)
    }

    /// Bitstrings in index order.
    pub fn clusters(&self) -> &[String] {
        &self.clusters
    }

    /// Most frequent member word of a cluster (ties go to the smaller word).
    pub fn representative_word(&self, index: usize) -> Option<&str> {
        self.representatives.get(index).map(|(w, _)| w.as_str())
    }

    /// Sub-lexicon containing only the listed clusters, indexed in the given
    /// order. Unknown bitstrings are an error.
    pub fn restrict<'a, I>(&self, clusters: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut order = Vec::new();
        let mut remap = HashMap::new();
        for bits in clusters {
            let old = self
                .cluster_id(bits)
                .ok_or_else(|| Error::InvalidInput(format!("cluster '{bits}' is not in the lexicon")))?;
            if !remap.contains_key(&old) {
                remap.insert(old, order.len());
                order.push(old);
            }
        }
        let mut members: Vec<Vec<(&str, u64)>> = vec![Vec::new(); order.len()];
        for (word, &(old, count)) in &self.words {
            if let Some(&new) = remap.get(&old) {
                members[new].push((word.as_str(), count));
            }
        }
        let mut lex = Self::default();
        for (new, old) in order.iter().enumerate() {
            let bits = &self.clusters[*old];
            lex.clusters.push(bits.clone());
            lex.cluster_index.insert(bits.clone(), new);
            lex.representatives.push(self.representatives[*old].clone());
            for &(word, count) in &members[new] {
                lex.words.insert(word.to_string(), (new, count));
            }
        }
        Ok(lex)
    }

    /// Sub-lexicon of the clusters hit by `seqs`, keeping the original
    /// relative cluster order.
    pub fn restrict_to_seen<'a, I>(&self, seqs: I) -> Self
    where
        I: IntoIterator<Item = &'a TokenSequence>,
    {
        let seen: BTreeSet<usize> = seqs
            .into_iter()
            .flat_map(|s| s.iter().filter_map(|t| self.cluster_of(t)).collect::<Vec<_>>())
            .collect();
        self.restrict(seen.into_iter().map(|i| self.clusters[i].as_str()))
            .expect("seen clusters come from this lexicon")
    }
}

pub fn load_brown_lexicon(path: &Path) -> Result<BrownLexicon> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    BrownLexicon::parse(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::featurize_brown;

    const TABLE3: &str = "10001101\t?\t500\n10001100\t!\t400\n11111000001\tfake\t90\n001000\tnot\t300\n\
        111110010110\ttrue\t9422\n11110101011111\tbullshit\t40\n11111000001\tfaaake\t3\n";

    fn seq(ts: &[&str]) -> TokenSequence {
        TokenSequence::new(ts.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn parses_cluster_file() {
        let lex = BrownLexicon::parse("111110010110\ttrue\t9422\n", "t").unwrap();
        assert_eq!(lex.bitstring_of("true"), Some("111110010110"));
        assert_eq!(lex.num_clusters(), 1);
    }

    #[test]
    fn empty_file_gives_empty_lexicon() {
        let lex = BrownLexicon::parse("", "t").unwrap();
        assert!(lex.is_empty());
        assert_eq!(lex.num_clusters(), 0);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = BrownLexicon::parse("111\tok\t1\nabc\n", "lex.txt").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(BrownLexicon::parse("10x\tw\t1\n", "t").is_err());
        assert!(BrownLexicon::parse("10\tw\tmany\n", "t").is_err());
    }

    #[test]
    fn featurizes_by_cluster() {
        let lex = BrownLexicon::parse(TABLE3, "t").unwrap();
        let fake = lex.cluster_id("11111000001").unwrap();
        let x = featurize_brown(&seq(&["fake"]), &lex);
        assert_eq!(x.dims(), lex.num_clusters());
        assert_eq!(x.pairs(), &[(fake, 1.0)]);

        let x = featurize_brown(&seq(&["?", "!"]), &lex);
        assert_eq!(x.get(lex.cluster_id("10001101").unwrap()), 1.0);
        assert_eq!(x.get(lex.cluster_id("10001100").unwrap()), 1.0);
        assert_eq!(x.l1_norm(), 2.0);

        let x = featurize_brown(&seq(&["qqqqzz"]), &lex);
        assert_eq!((x.nnz(), x.dims()), (0, lex.num_clusters()));
    }

    #[test]
    fn representative_is_most_frequent_member() {
        let lex = BrownLexicon::parse(TABLE3, "t").unwrap();
        let fake = lex.cluster_id("11111000001").unwrap();
        assert_eq!(lex.representative_word(fake), Some("fake"));
    }

    #[test]
    fn restriction_keeps_only_seen_clusters() {
        let lex = BrownLexicon::parse(TABLE3, "t").unwrap();
        let sub = lex.restrict_to_seen(&[seq(&["true", "zzz", "faaake"])]);
        assert_eq!(sub.clusters(), ["11111000001", "111110010110"]);
        assert_eq!(sub.cluster_of("fake"), Some(0));
        assert_eq!(sub.cluster_of("?"), None);
        assert_eq!(sub.representative_word(0), Some("fake"));
    }
}
