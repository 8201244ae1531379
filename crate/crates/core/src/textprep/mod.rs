//! Tokenization, stop-word filtering and stemming.
//!
//! Every representation sees text through [`Preprocessor::preprocess`], which
//! is `porter_stem ∘ remove_stopwords ∘ tokenize` in that order, followed by
//! a second stop-list pass because a stem can coincide with a stop word
//! (`thes` → `the`).

mod porter;

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use unicode_normalization::char::{decompose_canonical, is_combining_mark};

use crate::error::{Error, Result};

pub use porter::porter_stem;

/// Ordered lowercase ASCII tokens, each matching `[a-z]+`.
pub type TokenList = Vec<String>;

/// The bundled English stop list (179 words).
pub const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// Maps one character to its ASCII letter, if it is a letter with a
/// single-letter base form (`é` → `e`).
fn fold_letter(c: char) -> Option<char> {
    if c.is_ascii_alphabetic() {
        return Some(c.to_ascii_lowercase());
    }
    let mut base = None;
    let mut clean = true;
    decompose_canonical(c, |d| {
        if base.is_none() {
            base = Some(d);
        } else if !is_combining_mark(d) {
            clean = false;
        }
    });
    match base {
        Some(b) if clean && b.is_ascii_alphabetic() && b != c => Some(b.to_ascii_lowercase()),
        _ => None,
    }
}

/// Splits text into lowercase alphabetic tokens.
///
/// Runs of characters that are neither letters nor digits separate tokens.
/// A token that contains a digit is discarded whole. Accented letters fold to
/// their ASCII base; letters with no such base are dropped in place.
pub fn tokenize(text: &str) -> TokenList {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut has_digit = false;

    let mut flush = |current: &mut String, has_digit: &mut bool| {
        if !*has_digit && !current.is_empty() {
            tokens.push(std::mem::take(current));
        }
        current.clear();
        *has_digit = false;
    };

    for c in text.chars() {
        if c.is_numeric() {
            has_digit = true;
        } else if c.is_alphabetic() {
            if let Some(letter) = fold_letter(c) {
                current.push(letter);
            }
        } else if !is_combining_mark(c) {
            flush(&mut current, &mut has_digit);
        }
    }
    flush(&mut current, &mut has_digit);
    tokens
}

/// A set of lowercase stop words.
#[derive(Debug, Clone)]
pub struct StopList {
    words: HashSet<String>,
    digest: String,
}

impl StopList {
    /// Parses the one-word-per-line format; `#` lines and blanks are skipped.
    pub fn parse(text: &str) -> StopList {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        let digest = Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        StopList { words, digest }
    }

    pub fn from_file(path: &Path) -> Result<StopList> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(StopList::parse(&text))
    }

    pub fn bundled() -> StopList {
        StopList::parse(BUNDLED_STOPWORDS)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// SHA-256 of the source text, hex encoded.
    pub fn digest(&self) -> &str {
        &self.digest
    }
}

pub fn remove_stopwords(tokens: TokenList, stop: &StopList) -> TokenList {
    tokens.into_iter().filter(|t| !stop.contains(t)).collect()
}

#[derive(Debug, Clone)]
pub struct Preprocessor {
    stop: StopList,
}

impl Preprocessor {
    pub fn new(stop: StopList) -> Self {
        Preprocessor { stop }
    }

    pub fn stop_list(&self) -> &StopList {
        &self.stop
    }

    pub fn preprocess(&self, text: &str) -> TokenList {
        remove_stopwords(tokenize(text), &self.stop)
            .iter()
            .map(|t| porter_stem(t))
            .filter(|t| !self.stop.contains(t))
            .collect()
    }
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor::new(StopList::bundled())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> TokenList {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Hello, World!"), toks(&["hello", "world"]));
        assert_eq!(tokenize("COVID-19 cases rose 5%"), toks(&["covid", "cases", "rose"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("mp3 players"), toks(&["players"]));
        assert_eq!(tokenize("don't"), toks(&["don", "t"]));
    }

    #[test]
    fn tokenize_folds_diacritics() {
        assert_eq!(tokenize("Café naïve ÉCOLE"), toks(&["cafe", "naive", "ecole"]));
        // no single-letter base form: dropped in place
        assert_eq!(tokenize("straße"), toks(&["strae"]));
        assert_eq!(tokenize("日本 news"), toks(&["news"]));
    }

    #[test]
    fn bundled_list() {
        let stop = StopList::bundled();
        assert_eq!(stop.len(), 179);
        assert!(stop.contains("the"));
        assert!(!stop.contains("sky"));
        assert_eq!(stop.digest().len(), 64);
    }

    #[test]
    fn stopword_removal() {
        let stop = StopList::bundled();
        assert_eq!(
            remove_stopwords(toks(&["the", "sky", "is", "blue"]), &stop),
            toks(&["sky", "blue"])
        );
        assert!(remove_stopwords(vec![], &stop).is_empty());
        let plain = toks(&["quick", "brown", "fox"]);
        assert_eq!(remove_stopwords(plain.clone(), &stop), plain);
    }

    #[test]
    fn stop_list_file_format() {
        let stop = StopList::parse("# comment\nFoo\n\n  bar \n#baz\n");
        assert_eq!(stop.len(), 2);
        assert!(stop.contains("foo") && stop.contains("bar") && !stop.contains("baz"));
    }

    #[test]
    fn preprocess_examples() {
        let pre = Preprocessor::default();
        assert_eq!(pre.preprocess("The ponies are running"), toks(&["poni", "run"]));
        assert!(pre.preprocess("").is_empty());
        let fixed = "poni run sky";
        assert_eq!(pre.preprocess(fixed), toks(&["poni", "run", "sky"]));
        assert_eq!(pre.preprocess("thes wills"), toks(&[]));
    }

    proptest! {
        #[test]
        fn retokenize_is_stable(text in "\\PC{0,80}") {
            let once = tokenize(&text);
            prop_assert_eq!(tokenize(&once.join(" ")), once);
        }

        #[test]
        fn tokens_are_lowercase_alpha(text in "\\PC{0,80}") {
            for t in tokenize(&text) {
                prop_assert!(!t.is_empty() && t.bytes().all(|b| b.is_ascii_lowercase()));
            }
        }

        #[test]
        fn preprocess_drops_stopwords(words in proptest::collection::vec("[A-Za-z']{1,8}", 0..30)) {
            let pre = Preprocessor::default();
            let text = words.join(" ");
            for t in pre.preprocess(&text) {
                prop_assert!(!pre.stop_list().contains(&t), "{} survived", t);
                prop_assert!(!t.chars().any(|c| c.is_uppercase()));
            }
        }
    }
}
