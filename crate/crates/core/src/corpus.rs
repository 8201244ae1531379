//! Loading the LIAR and Kaggle fake-news files into one labeled-corpus shape.
//!
//! Every loader produces a [`LabeledCorpus`] whose documents keep file order.
//! Malformed rows never abort a load: they are skipped and tallied in
//! `drop_count` so reports can surface how dirty the input was.
//!
//! Label convention across all sources: `1` means true/reliable, `0` means
//! false/fake.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary class label. `1` is true/reliable, `0` is false/fake.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Label(u8);

impl Label {
    pub const FALSE: Label = Label(0);
    pub const TRUE: Label = Label(1);

    pub fn new(value: u8) -> Option<Label> {
        match value {
            0 | 1 => Some(Label(value)),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self.0
    }

    pub fn is_true(self) -> bool {
        self.0 == 1
    }

    pub fn flipped(self) -> Label {
        Label(1 - self.0)
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(value: u8) -> std::result::Result<Self, Self::Error> {
        Label::new(value).ok_or_else(|| format!("label must be 0 or 1, got {value}"))
    }
}

impl From<Label> for u8 {
    fn from(label: Label) -> u8 {
        label.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub content: String,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Liar,
    Kaggle,
    Fixture,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Source::Liar => "liar",
            Source::Kaggle => "kaggle",
            Source::Fixture => "fixture",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "liar" => Ok(Source::Liar),
            "kaggle" => Ok(Source::Kaggle),
            "fixture" => Ok(Source::Fixture),
            other => Err(Error::InvalidArgument(format!("unknown dataset {other:?}"))),
        }
    }
}

/// An ordered, immutable list of labeled documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledCorpus {
    docs: Vec<Document>,
    source: Source,
    drop_count: usize,
}

impl LabeledCorpus {
    /// Builds a corpus, rejecting duplicate document ids.
    pub fn new(docs: Vec<Document>, source: Source, drop_count: usize) -> Result<Self> {
        let mut seen = HashSet::with_capacity(docs.len());
        for doc in &docs {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::format(
                    "corpus",
                    format!("duplicate document id {:?}", doc.id),
                ));
            }
        }
        Ok(LabeledCorpus {
            docs,
            source,
            drop_count,
        })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn drop_count(&self) -> usize {
        self.drop_count
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.docs.iter().map(|d| d.label)
    }

    /// Seeded uniform subset of at most `n` documents, kept in corpus order.
    pub fn sample(&self, n: usize, seed: u64) -> LabeledCorpus {
        if n >= self.docs.len() {
            return self.clone();
        }
        let mut order: Vec<usize> = (0..self.docs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        order.truncate(n);
        order.sort_unstable();
        LabeledCorpus {
            docs: order.into_iter().map(|i| self.docs[i].clone()).collect(),
            source: self.source,
            drop_count: self.drop_count,
        }
    }
}

/// Column positions for a LIAR tab-separated file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiarColumns {
    pub id_col: Option<usize>,
    pub label_col: usize,
    pub statement_col: usize,
}

impl Default for LiarColumns {
    fn default() -> Self {
        LiarColumns {
            id_col: Some(0),
            label_col: 1,
            statement_col: 2,
        }
    }
}

/// Collapses LIAR's six truthfulness grades onto the binary label.
///
/// `half-true`, `mostly-true` and `true` become [`Label::TRUE`];
/// `pants-fire`, `false` and `barely-true` become [`Label::FALSE`].
pub fn map_liar_label(raw: &str) -> Result<Label> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "half-true" | "mostly-true" | "true" => Ok(Label::TRUE),
        "pants-fire" | "false" | "barely-true" => Ok(Label::FALSE),
        _ => Err(Error::UnknownLabel(raw.to_string())),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub fn load_liar(path: &Path, columns: LiarColumns) -> Result<LabeledCorpus> {
    let reader = BufReader::new(open(path)?);
    let needed = columns
        .label_col
        .max(columns.statement_col)
        .max(columns.id_col.unwrap_or(0))
        + 1;

    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    let mut dropped = 0;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < needed {
            dropped += 1;
            continue;
        }
        let Ok(label) = map_liar_label(fields[columns.label_col]) else {
            log::debug!("{}:{}: unmappable label", path.display(), line_no + 1);
            dropped += 1;
            continue;
        };
        let content = fields[columns.statement_col].trim();
        if content.is_empty() {
            dropped += 1;
            continue;
        }
        let id = match columns.id_col {
            Some(c) if !fields[c].trim().is_empty() => fields[c].trim().to_string(),
            _ => format!("line{}", line_no + 1),
        };
        if !seen.insert(id.clone()) {
            dropped += 1;
            continue;
        }
        docs.push(Document {
            id,
            content: content.to_string(),
            label,
        });
    }
    LabeledCorpus::new(docs, Source::Liar, dropped)
}

/// Loads the Kaggle fake-news training CSV.
///
/// The source file marks unreliable articles with `1`; the label is flipped
/// so that `1` means reliable, matching LIAR.
pub fn load_kaggle(path: &Path) -> Result<LabeledCorpus> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(BufReader::new(open(path)?));
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let (Some(title_col), Some(text_col), Some(label_col)) = (find("title"), find("text"), find("label"))
    else {
        return Err(Error::format(
            path.display().to_string(),
            "header must name title, text and label columns",
        ));
    };
    let id_col = find("id");

    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    let mut dropped = 0;
    for (row, record) in reader.records().enumerate() {
        let Ok(record) = record else {
            dropped += 1;
            continue;
        };
        let label = match record.get(label_col).map(|s| s.trim().parse::<u8>()) {
            Some(Ok(1)) => Label::FALSE,
            Some(Ok(0)) => Label::TRUE,
            _ => {
                dropped += 1;
                continue;
            }
        };
        let title = record.get(title_col).unwrap_or("").trim();
        let text = record.get(text_col).unwrap_or("").trim();
        let content = match (title.is_empty(), text.is_empty()) {
            (true, true) => {
                dropped += 1;
                continue;
            }
            (false, true) => title.to_string(),
            (true, false) => text.to_string(),
            (false, false) => format!("{title} {text}"),
        };
        let id = id_col
            .and_then(|c| record.get(c))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .unwrap_or_else(|| format!("row{row}"));
        if !seen.insert(id.clone()) {
            dropped += 1;
            continue;
        }
        docs.push(Document { id, content, label });
    }
    LabeledCorpus::new(docs, Source::Kaggle, dropped)
}

/// The keyword-separable fixture shipped with the crate.
pub const BUNDLED_FIXTURE: &str = include_str!("../data/fixture_separable.jsonl");

/// Parses the line-delimited fixture format: one `{"id", "content",
/// "label"}` JSON object per line.
pub fn parse_fixture(text: &str) -> Result<LabeledCorpus> {
    let mut docs = Vec::new();
    let mut dropped = 0;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Document>(line) {
            Ok(doc) if !doc.content.trim().is_empty() => docs.push(doc),
            _ => dropped += 1,
        }
    }
    LabeledCorpus::new(docs, Source::Fixture, dropped)
}

pub fn load_fixture(path: &Path) -> Result<LabeledCorpus> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fixture(&text)
}

pub fn bundled_fixture() -> LabeledCorpus {
    parse_fixture(BUNDLED_FIXTURE).expect("bundled fixture is valid")
}

pub fn write_fixture(corpus: &LabeledCorpus, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in corpus.docs() {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// A train/test partition of one corpus.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: LabeledCorpus,
    pub test: LabeledCorpus,
    pub seed: u64,
    pub ratio: f64,
}

/// Seeded shuffle followed by a prefix cut; `round(ratio * N)` documents go
/// to the training side.
pub fn split(corpus: &LabeledCorpus, ratio: f64, seed: u64) -> Result<SplitPair> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidRatio(ratio));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut docs = corpus.docs.clone();
    docs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (ratio * docs.len() as f64).round() as usize;
    let test = docs.split_off(n_train);
    Ok(SplitPair {
        train: LabeledCorpus {
            docs,
            source: corpus.source,
            drop_count: 0,
        },
        test: LabeledCorpus {
            docs: test,
            source: corpus.source,
            drop_count: 0,
        },
        seed,
        ratio,
    })
}

/// Share of the majority class.
pub fn class_balance(corpus: &LabeledCorpus) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let trues = corpus.labels().filter(|l| l.is_true()).count();
    let majority = trues.max(corpus.len() - trues);
    Ok(majority as f64 / corpus.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, label: u8) -> Document {
        Document {
            id: id.to_string(),
            content: format!("content of {id}"),
            label: Label::new(label).unwrap(),
        }
    }

    fn corpus_of(labels: &[u8]) -> LabeledCorpus {
        let docs = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| doc(&format!("d{i}"), l))
            .collect();
        LabeledCorpus::new(docs, Source::Fixture, 0).unwrap()
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn liar_labels() {
        assert_eq!(map_liar_label("true").unwrap(), Label::TRUE);
        assert_eq!(map_liar_label("pants-fire").unwrap(), Label::FALSE);
        assert_eq!(map_liar_label("TRUE").unwrap(), Label::TRUE);
        for raw in ["half-true", "mostly-true"] {
            assert_eq!(map_liar_label(raw).unwrap(), Label::TRUE);
        }
        for raw in ["false", "barely-true"] {
            assert_eq!(map_liar_label(raw).unwrap(), Label::FALSE);
        }
        match map_liar_label("mostly true") {
            Err(Error::UnknownLabel(v)) => assert_eq!(v, "mostly true"),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn liar_row_extraction() {
        let f = write_tmp(
            "123.json\thalf-true\tSays the economy grew.\teconomy\tjane-doe\n\
             124.json\tpants-fire\tMoon is cheese.\n\
             125.json\tunknown\tNope.\n\
             126.json\ttrue\n\
             127.json\tfalse\t   \n",
        );
        let corpus = load_liar(f.path(), LiarColumns::default()).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.drop_count(), 3);
        assert_eq!(corpus.docs()[0].id, "123.json");
        assert_eq!(corpus.docs()[0].label, Label::TRUE);
        assert_eq!(corpus.docs()[0].content, "Says the economy grew.");
        assert_eq!(corpus.docs()[1].label, Label::FALSE);
    }

    #[test]
    fn liar_empty_file() {
        let f = write_tmp("");
        let corpus = load_liar(f.path(), LiarColumns::default()).unwrap();
        assert!(corpus.is_empty());
        assert_eq!(corpus.drop_count(), 0);
    }

    #[test]
    fn liar_missing_file_names_path() {
        let err = load_liar(Path::new("/no/such/liar.tsv"), LiarColumns::default()).unwrap_err();
        assert!(err.to_string().contains("/no/such/liar.tsv"));
    }

    #[test]
    fn kaggle_rows() {
        let f = write_tmp(
            "id,title,author,text,label\n\
             0,A,someone,B C,0\n\
             1,,nobody,,1\n\
             2,\"Quoted, title\",x,\"multi\nline\",1\n\
             3,T,y,body,maybe\n\
             4,,z,only text,0\n",
        );
        let corpus = load_kaggle(f.path()).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.drop_count(), 2);
        assert_eq!(corpus.docs()[0].content, "A B C");
        assert_eq!(corpus.docs()[0].label, Label::TRUE);
        assert_eq!(corpus.docs()[1].content, "Quoted, title multi\nline");
        assert_eq!(corpus.docs()[1].label, Label::FALSE);
        assert_eq!(corpus.docs()[2].content, "only text");
    }

    #[test]
    fn kaggle_missing_header() {
        let f = write_tmp("foo,bar\n1,2\n");
        assert!(matches!(load_kaggle(f.path()), Err(Error::Format { .. })));
    }

    #[test]
    fn fixture_round_trip() {
        let corpus = LabeledCorpus::new(
            vec![
                Document {
                    id: "a".into(),
                    content: "quote \" and\nnewline".into(),
                    label: Label::TRUE,
                },
                doc("b", 0),
            ],
            Source::Fixture,
            0,
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_fixture(&corpus, f.path()).unwrap();
        assert_eq!(load_fixture(f.path()).unwrap(), corpus);
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(LabeledCorpus::new(vec![doc("a", 0), doc("a", 1)], Source::Fixture, 0).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let corpus = corpus_of(&[0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
        let a = split(&corpus, 0.8, 7).unwrap();
        assert_eq!(a.train.len(), 8);
        assert_eq!(a.test.len(), 2);
        let b = split(&corpus, 0.8, 7).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        let train_ids: HashSet<_> = a.train.docs().iter().map(|d| &d.id).collect();
        assert!(a.test.docs().iter().all(|d| !train_ids.contains(&d.id)));
    }

    #[test]
    fn split_rejects_bad_ratio() {
        let corpus = corpus_of(&[0, 1]);
        for ratio in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(split(&corpus, ratio, 1).is_err());
        }
        let empty = corpus_of(&[]);
        assert!(matches!(split(&empty, 0.5, 1), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn balance() {
        assert_eq!(class_balance(&corpus_of(&[1, 1, 0, 0])).unwrap(), 0.5);
        assert_eq!(class_balance(&corpus_of(&[1, 1, 1, 0])).unwrap(), 0.75);
        assert!(class_balance(&corpus_of(&[])).is_err());
    }

    #[test]
    fn sample_keeps_order() {
        let corpus = corpus_of(&[0; 20]);
        let s = corpus.sample(5, 3);
        assert_eq!(s.len(), 5);
        let pos: Vec<usize> = s
            .docs()
            .iter()
            .map(|d| corpus.docs().iter().position(|c| c.id == d.id).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(corpus.sample(50, 3), corpus);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_is_partition(n in 1usize..200, ratio in 0.01f64..0.99, seed in any::<u64>()) {
                let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
                let corpus = corpus_of(&labels);
                let pair = split(&corpus, ratio, seed).unwrap();
                prop_assert_eq!(pair.train.len() + pair.test.len(), n);
                prop_assert_eq!(pair.train.len(), (ratio * n as f64).round() as usize);
                let mut ids: Vec<&String> = pair.train.docs().iter().chain(pair.test.docs()).map(|d| &d.id).collect();
                ids.sort();
                ids.dedup();
                prop_assert_eq!(ids.len(), n);
            }
        }
    }
}
