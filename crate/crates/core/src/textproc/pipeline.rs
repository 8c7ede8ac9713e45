use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rust_stemmers::{Algorithm, Stemmer};

use super::TokenSequence;
use crate::error::{Error, Result};

/// Punctuation characters that survive tokenization as their own tokens.
pub const PUNCTUATION: [char; 3] = ['.', '!', '?'];

const BUNDLED_STOPWORDS: &str = include_str!("../../resources/stopwords_en.txt");
const BUNDLED_EMOTICONS: &str = include_str!("../../resources/emoticons.tsv");

// Stemming to a fixpoint converges in one or two rounds for English; the cap
// only guards against a pathological cycle.
const MAX_STEM_ROUNDS: usize = 8;

/// Tweet normalization pipeline.
///
/// Steps, in order: drop `@username` tokens, replace emoticons, lowercase,
/// tokenize (keeping runs of `.`, `!`, `?` as separate tokens and deleting all
/// other punctuation), squash character runs longer than two, drop stopwords,
/// stem alphabetic tokens.
///
/// Stemming is iterated to a fixpoint and stems that land on a stopword are
/// dropped, so that running the pipeline over its own output is a no-op.
pub struct Preprocessor {
    emoticons: HashMap<String, String>,
    stopwords: HashSet<String>,
    stemmer: Stemmer,
}

impl fmt::Debug for Preprocessor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Preprocessor")
            .field("emoticons", &self.emoticons.len())
            .field("stopwords", &self.stopwords.len())
            .finish()
    }
}

impl Preprocessor {
    pub fn new(emoticons: HashMap<String, String>, stopwords: HashSet<String>) -> Result<Self> {
        for (emo, word) in &emoticons {
            if emo.chars().all(|c| c.is_alphanumeric() || PUNCTUATION.contains(&c)) {
                return Err(Error::InvalidInput(format!(
                    "emoticon '{emo}' must contain a symbol other than letters, digits and . ! ?"
                )));
            }
            if word.is_empty() || !word.chars().all(|c| c.is_alphabetic() && !c.is_uppercase()) {
                return Err(Error::InvalidInput(format!(
                    "emoticon replacement '{word}' must be a single lowercase word"
                )));
            }
        }
        Ok(Self {
            emoticons,
            stopwords,
            stemmer: Stemmer::create(Algorithm::English),
        })
    }

    /// Pipeline with the stopword list and emoticon map shipped in `resources/`.
    pub fn bundled() -> Self {
        let emoticons = parse_emoticons(BUNDLED_EMOTICONS, "bundled emoticons").expect("bundled emoticons parse");
        let stopwords = parse_stopwords(BUNDLED_STOPWORDS);
        Self::new(emoticons, stopwords).expect("bundled resources are valid")
    }

    /// Loads resources from files, falling back to the bundled ones for any
    /// path that is `None`.
    pub fn from_files(emoticons: Option<&Path>, stopwords: Option<&Path>) -> Result<Self> {
        let emoticons = match emoticons {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                parse_emoticons(&text, &p.display().to_string())?
            }
            None => parse_emoticons(BUNDLED_EMOTICONS, "bundled emoticons")?,
        };
        let stopwords = match stopwords {
            Some(p) => parse_stopwords(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
            None => parse_stopwords(BUNDLED_STOPWORDS),
        };
        Self::new(emoticons, stopwords)
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn preprocess(&self, text: &str) -> TokenSequence {
        // 1-3: usernames, emoticons, lowercase
        let lowered: Vec<String> = text
            .split_whitespace()
            .filter(|t| !t.starts_with('@'))
            .map(|t| match self.emoticons.get(t) {
                Some(word) => word.clone(),
                None => t.to_lowercase(),
            })
            .collect();

        let mut out = Vec::new();
        for chunk in &lowered {
            for token in tokenize_chunk(chunk) {
                let token = squash_repeats(&token);
                if is_punctuation_token(&token) {
                    out.push(token);
                    continue;
                }
                if self.stopwords.contains(&token) {
                    continue;
                }
                if let Some(stem) = self.stem_to_fixpoint(token) {
                    out.push(stem);
                }
            }
        }
        TokenSequence::new(out)
    }

    fn stem_to_fixpoint(&self, token: String) -> Option<String> {
        if !token.chars().all(char::is_alphabetic) {
            return Some(token);
        }
        let mut current = token;
        for _ in 0..MAX_STEM_ROUNDS {
            let next = squash_repeats(&self.stemmer.stem(&current));
            if next == current {
                break;
            }
            current = next;
        }
        if current.is_empty() || self.stopwords.contains(&current) {
            None
        } else {
            Some(current)
        }
    }
}

fn is_punctuation_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| PUNCTUATION.contains(&c))
}

/// Splits one whitespace-free chunk into word tokens and punctuation-run
/// tokens. A punctuation run is a maximal run of one repeated `.`, `!` or `?`.
fn tokenize_chunk(chunk: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let mut punct = String::new();
    for c in chunk.chars() {
        if PUNCTUATION.contains(&c) {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if !punct.is_empty() && !punct.starts_with(c) {
                tokens.push(std::mem::take(&mut punct));
            }
            punct.push(c);
        } else if c.is_alphanumeric() {
            if !punct.is_empty() {
                tokens.push(std::mem::take(&mut punct));
            }
            word.push(c);
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    if !punct.is_empty() {
        tokens.push(punct);
    }
    tokens
}

/// Replaces every run of three or more identical characters by exactly two.
pub fn squash_repeats(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    let mut prev: Option<char> = None;
    let mut run = 0usize;
    for c in token.chars() {
        if Some(c) == prev {
            run += 1;
        } else {
            prev = Some(c);
            run = 1;
        }
        if run <= 2 {
            out.push(c);
        }
    }
    out
}

fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

fn parse_emoticons(text: &str, source: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with("# ") {
            continue;
        }
        let mut fields = line.split('\t');
        match (fields.next(), fields.next(), fields.next()) {
            (Some(emo), Some(word), None) if !emo.is_empty() && !word.trim().is_empty() => {
                map.insert(emo.to_string(), word.trim().to_string());
            }
            _ => return Err(Error::parse(source, i + 1, "expected 'emoticon<TAB>replacement'")),
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        Preprocessor::bundled().preprocess(s).tokens
    }

    #[test]
    fn lengthening_is_squashed() {
        assert_eq!(toks("LOOOOOL"), ["lool"]);
        assert_eq!(toks("looool"), ["lool"]);
    }

    #[test]
    fn empty_text() {
        assert!(toks("").is_empty());
        assert!(toks("   \t ").is_empty());
    }

    #[test]
    fn username_removed_and_punctuation_kept() {
        assert_eq!(toks("@bob Hospital attacked!!!"), ["hospit", "attack", "!!"]);
    }

    #[test]
    fn emoticons_are_mapped_before_case_folding() {
        assert_eq!(toks(":S"), ["confus"]);
        assert_eq!(toks(":D"), ["laugh"]);
        assert_eq!(toks("fire :( :|"), ["fire", "sad", "neutral"]);
    }

    #[test]
    fn other_punctuation_is_deleted() {
        assert_eq!(toks("children's #riots, (really)"), ["children", "riot", "realli"]);
        assert_eq!(toks("wait?!"), ["wait", "?", "!"]);
    }

    #[test]
    fn stopwords_dropped_but_negation_kept() {
        assert_eq!(toks("this is not true"), ["not", "true"]);
    }

    #[test]
    fn squash_helper() {
        assert_eq!(squash_repeats("aaabbbbcc"), "aabbcc");
        assert_eq!(squash_repeats("!!!"), "!!");
        assert_eq!(squash_repeats(""), "");
    }

    #[test]
    fn bad_emoticon_key_rejected() {
        let mut m = HashMap::new();
        m.insert("xD".to_string(), "laugh".to_string());
        assert!(Preprocessor::new(m, HashSet::new()).is_err());
    }

    fn tweetish() -> impl Strategy<Value = String> {
        let word = prop_oneof![
            "[a-zA-Z]{1,10}",
            ("[a-z]{1,3}", "[a-zA-Z!?]", 3usize..7, "[a-z]{0,3}")
                .prop_map(|(pre, c, n, post)| format!("{pre}{}{post}", c.repeat(n))),
            "@[a-z]{1,6}",
            "#[A-Za-z]{1,8}",
            "[!?.]{1,4}",
            "[0-9]{1,4}",
            Just(":)".to_string()),
            Just(":S".to_string()),
            Just("don't".to_string()),
            Just("being".to_string()),
            Just("willing".to_string()),
            "[a-zéßİΣ]{1,6}",
            "[a-z]{1,5}[,;:'\"()][a-z]{0,5}",
        ];
        proptest::collection::vec(word, 0..12).prop_map(|ws| ws.join(" "))
    }

    proptest! {
        #[test]
        fn preprocess_is_idempotent(text in tweetish()) {
            let pre = Preprocessor::bundled();
            let once = pre.preprocess(&text);
            let twice = pre.preprocess(&once.joined());
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn output_tokens_are_normalized(text in tweetish()) {
            let pre = Preprocessor::bundled();
            for t in pre.preprocess(&text).tokens {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.starts_with('@'));
                prop_assert!(!t.chars().any(char::is_uppercase), "uppercase in {}", t);
                let chars: Vec<char> = t.chars().collect();
                prop_assert!(!chars.windows(3).any(|w| w[0] == w[1] && w[1] == w[2]), "run in {}", t);
                if t.chars().any(|c| !c.is_alphanumeric()) {
                    prop_assert!(t.chars().all(|c| PUNCTUATION.contains(&c)), "bad punctuation token {}", t);
                }
            }
        }
    }
}
