use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::textproc::{StanceLabel, TweetRecord};

const RIOTS_COUNTS: &str = include_str!("../../resources/riots_counts.tsv");

/// Tweets grouped by rumour, rumours in lexicographic order, each rumour
/// sorted by a dense 0-based `seq_index`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    rumours: BTreeMap<String, Vec<TweetRecord>>,
}

impl Corpus {
    /// Groups records by rumour and renumbers `seq_index` densely, keeping
    /// the given order (stable on ties). Fails on a repeated tweet id within
    /// a rumour.
    pub fn from_records(records: Vec<TweetRecord>) -> Result<Self> {
        let mut rumours: BTreeMap<String, Vec<TweetRecord>> = BTreeMap::new();
        let mut ids: HashSet<(String, String)> = HashSet::new();
        for r in records {
            if !ids.insert((r.rumour_id.clone(), r.tweet_id.clone())) {
                return Err(Error::InvalidInput(format!(
                    "duplicate tweet id '{}' in rumour '{}'",
                    r.tweet_id, r.rumour_id
                )));
            }
            rumours.entry(r.rumour_id.clone()).or_default().push(r);
        }
        for recs in rumours.values_mut() {
            recs.sort_by_key(|r| r.seq_index);
            for (i, r) in recs.iter_mut().enumerate() {
                r.seq_index = i;
            }
        }
        Ok(Self { rumours })
    }

    /// Parses the tab-separated corpus format
    /// `tweet_id, rumour_id, seq_index, label, text`. A first line whose
    /// first field is `tweet_id` is treated as a header.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut records = Vec::new();
        let mut ids: HashSet<(String, String)> = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.is_empty() || (i == 0 && line.split('\t').next() == Some("tweet_id")) {
                continue;
            }
            let fields: Vec<&str> = line.splitn(5, '\t').collect();
            let [tweet_id, rumour_id, seq, label, text] = fields[..] else {
                return Err(Error::parse(source, lineno, format!("expected 5 tab-separated fields, found {}", fields.len())));
            };
            if tweet_id.is_empty() || rumour_id.is_empty() {
                return Err(Error::parse(source, lineno, "empty tweet_id or rumour_id"));
            }
            let seq_index: usize = seq
                .trim()
                .parse()
                .map_err(|_| Error::parse(source, lineno, format!("bad seq_index '{seq}'")))?;
            let label: StanceLabel = label
                .trim()
                .parse()
                .map_err(|_| Error::parse(source, lineno, format!("unknown label '{label}'")))?;
            if !ids.insert((rumour_id.to_string(), tweet_id.to_string())) {
                return Err(Error::parse(
                    source,
                    lineno,
                    format!("duplicate tweet id '{tweet_id}' in rumour '{rumour_id}'"),
                ));
            }
            records.push(TweetRecord {
                tweet_id: tweet_id.to_string(),
                rumour_id: rumour_id.to_string(),
                seq_index,
                text: text.to_string(),
                label,
            });
        }
        Self::from_records(records)
    }

    pub fn ingest(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// A corpus with the given per-rumour label counts and unique
    /// placeholder texts. Within a rumour, supporting tweets come first,
    /// then denying, then questioning.
    pub fn from_class_counts(counts: &[(String, [usize; 3])]) -> Result<Self> {
        let mut records = Vec::new();
        for (r, (rumour, c)) in counts.iter().enumerate() {
            let mut seq = 0;
            for label in StanceLabel::ALL {
                for _ in 0..c[label.code()] {
                    records.push(TweetRecord {
                        tweet_id: format!("r{r}n{seq}"),
                        rumour_id: rumour.clone(),
                        seq_index: seq,
                        text: placeholder_text(r, seq),
                        label,
                    });
                    seq += 1;
                }
            }
        }
        Self::from_records(records)
    }

    /// The bundled per-rumour counts of the riots rumour collection.
    pub fn riots_counts() -> Vec<(String, [usize; 3])> {
        parse_counts(RIOTS_COUNTS).expect("bundled counts parse")
    }

    /// Placeholder corpus matching the bundled counts.
    pub fn riots_fixture() -> Self {
        Self::from_class_counts(&Self::riots_counts()).expect("bundled counts are valid")
    }

    pub fn rumour_ids(&self) -> impl Iterator<Item = &str> {
        self.rumours.keys().map(String::as_str)
    }

    pub fn num_rumours(&self) -> usize {
        self.rumours.len()
    }

    pub fn len(&self) -> usize {
        self.rumours.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rumours.is_empty()
    }

    /// Records of one rumour in `seq_index` order.
    pub fn records(&self, rumour_id: &str) -> Option<&[TweetRecord]> {
        self.rumours.get(rumour_id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[TweetRecord])> {
        self.rumours.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn label_counts(&self) -> BTreeMap<&str, [usize; 3]> {
        self.iter()
            .map(|(r, recs)| {
                let mut c = [0; 3];
                for rec in recs {
                    c[rec.label.code()] += 1;
                }
                (r, c)
            })
            .collect()
    }

    /// Tab-separated per-rumour label counts with a totals row.
    pub fn count_report(&self) -> String {
        let mut out = String::from("rumour_id\tsupport\tdeny\tquestion\ttotal\n");
        let mut total = [0; 3];
        for (r, c) in self.label_counts() {
            let _ = writeln!(out, "{r}\t{}\t{}\t{}\t{}", c[0], c[1], c[2], c.iter().sum::<usize>());
            for i in 0..3 {
                total[i] += c[i];
            }
        }
        let _ = writeln!(
            out,
            "total\t{}\t{}\t{}\t{}",
            total[0],
            total[1],
            total[2],
            total.iter().sum::<usize>()
        );
        out
    }
}

/// Distinct after preprocessing: digits are separated so that no character
/// repeats three times in a row.
fn placeholder_text(rumour: usize, seq: usize) -> String {
    let digits: Vec<String> = seq.to_string().chars().map(String::from).collect();
    format!("r{rumour}q{}", digits.join("q"))
}

fn parse_counts(text: &str) -> Result<Vec<(String, [usize; 3])>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || Error::parse("riots_counts.tsv", i + 1, "expected rumour<TAB>support<TAB>deny<TAB>question");
        let [rumour, s, d, q] = f[..] else { return Err(bad()) };
        let n = |x: &str| x.parse::<usize>().map_err(|_| bad());
        rows.push((rumour.to_string(), [n(s)?, n(d)?, n(q)?]));
    }
    Ok(rows)
}
