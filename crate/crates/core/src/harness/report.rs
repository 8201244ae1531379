use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::Source;
use crate::error::{Error, Result};
use crate::models::{Architecture, Representation};

pub const CSV_COLUMNS: [&str; 11] = [
    "dataset",
    "representation",
    "architecture",
    "accuracy",
    "n_train",
    "n_test",
    "epochs",
    "seed",
    "wall_time_s",
    "drop_count",
    "divergent",
];

/// Grid coordinates of one cell. The baseline has no representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub dataset: Source,
    pub representation: Option<Representation>,
    pub architecture: Architecture,
}

impl CellKey {
    pub fn new(dataset: Source, representation: Option<Representation>, architecture: Architecture) -> Self {
        CellKey {
            dataset,
            representation,
            architecture,
        }
    }

    fn representation_name(&self) -> &'static str {
        self.representation.map_or("-", Representation::name)
    }

    /// Stable text form, used for seeds and file names.
    pub fn slug(&self) -> String {
        format!("{}_{}_{}", self.dataset, self.representation_name(), self.architecture)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub key: CellKey,
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub epochs: usize,
    pub seed: u64,
    pub wall_time_s: Option<f64>,
    pub drop_count: usize,
    pub divergent: bool,
}

/// Report header facts: version, effective config, stop-list digest and
/// profile.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportMeta {
    pub version: String,
    pub profile: String,
    pub stoplist_sha256: String,
    pub config_json: String,
}

/// Dataset × representation × architecture accuracy grid. Cells that
/// failed carry a reason instead of a row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsMatrix {
    pub meta: ReportMeta,
    rows: BTreeMap<CellKey, ResultRow>,
    absent: BTreeMap<CellKey, String>,
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl ResultsMatrix {
    pub fn new(meta: ReportMeta) -> Self {
        ResultsMatrix {
            meta,
            ..Default::default()
        }
    }

    pub fn insert(&mut self, row: ResultRow) -> Result<()> {
        if self.rows.contains_key(&row.key) || self.absent.contains_key(&row.key) {
            return Err(Error::InvalidArgument(format!("duplicate cell {}", row.key.slug())));
        }
        self.rows.insert(row.key, row);
        Ok(())
    }

    pub fn mark_absent(&mut self, key: CellKey, reason: &str) -> Result<()> {
        if self.rows.contains_key(&key) || self.absent.contains_key(&key) {
            return Err(Error::InvalidArgument(format!("duplicate cell {}", key.slug())));
        }
        self.absent.insert(key, one_line(reason));
        Ok(())
    }

    pub fn get(&self, key: &CellKey) -> Option<&ResultRow> {
        self.rows.get(key)
    }

    pub fn absent_reason(&self, key: &CellKey) -> Option<&str> {
        self.absent.get(key).map(String::as_str)
    }

    pub fn rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.values()
    }

    pub fn absent(&self) -> impl Iterator<Item = (&CellKey, &str)> {
        self.absent.iter().map(|(k, r)| (k, r.as_str()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV with `#` comment lines for the header facts and absent cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let m = &self.meta;
        writeln!(out, "# version {}", m.version).unwrap();
        writeln!(out, "# profile {}", m.profile).unwrap();
        writeln!(out, "# stoplist_sha256 {}", m.stoplist_sha256).unwrap();
        writeln!(out, "# config {}", m.config_json).unwrap();
        for (key, reason) in &self.absent {
            writeln!(
                out,
                "# absent {} {} {} {}",
                key.dataset,
                key.representation_name(),
                key.architecture,
                reason
            )
            .unwrap();
        }
        out.push_str(&CSV_COLUMNS.join(","));
        out.push('\n');
        for r in self.rows.values() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.key.dataset,
                r.key.representation_name(),
                r.key.architecture,
                r.accuracy,
                r.n_train,
                r.n_test,
                r.epochs,
                r.seed,
                r.wall_time_s.map(|t| t.to_string()).unwrap_or_default(),
                r.drop_count,
                r.divergent
            )
            .unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |reason: String| Error::format("report csv", reason);
        let mut matrix = ResultsMatrix::default();
        let mut header_seen = false;
        for (n, line) in text.lines().enumerate() {
            if let Some(comment) = line.strip_prefix("# ") {
                let (tag, rest) = comment.split_once(' ').unwrap_or((comment, ""));
                match tag {
                    "version" => matrix.meta.version = rest.to_string(),
                    "profile" => matrix.meta.profile = rest.to_string(),
                    "stoplist_sha256" => matrix.meta.stoplist_sha256 = rest.to_string(),
                    "config" => matrix.meta.config_json = rest.to_string(),
                    "absent" => {
                        let mut parts = rest.splitn(4, ' ');
                        let (Some(d), Some(r), Some(a)) = (parts.next(), parts.next(), parts.next())
                        else {
                            return Err(bad(format!("line {}: malformed absent entry", n + 1)));
                        };
                        let key = parse_key(d, r, a)?;
                        matrix.mark_absent(key, parts.next().unwrap_or(""))?;
                    }
                    _ => {}
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if !header_seen {
                if line != CSV_COLUMNS.join(",") {
                    return Err(bad(format!("unexpected header {line:?}")));
                }
                header_seen = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != CSV_COLUMNS.len() {
                return Err(bad(format!("line {}: expected {} fields", n + 1, CSV_COLUMNS.len())));
            }
            let num = |i: usize| -> Result<u64> {
                f[i].parse()
                    .map_err(|_| bad(format!("line {}: bad {} {:?}", n + 1, CSV_COLUMNS[i], f[i])))
            };
            let row = ResultRow {
                key: parse_key(f[0], f[1], f[2])?,
                accuracy: f[3]
                    .parse()
                    .map_err(|_| bad(format!("line {}: bad accuracy", n + 1)))?,
                n_train: num(4)? as usize,
                n_test: num(5)? as usize,
                epochs: num(6)? as usize,
                seed: num(7)?,
                wall_time_s: match f[8] {
                    "" => None,
                    t => Some(t.parse().map_err(|_| bad(format!("line {}: bad wall time", n + 1)))?),
                },
                drop_count: num(9)? as usize,
                divergent: f[10]
                    .parse()
                    .map_err(|_| bad(format!("line {}: bad divergent flag", n + 1)))?,
            };
            matrix.insert(row)?;
        }
        if !header_seen {
            return Err(bad("missing column header".into()));
        }
        Ok(matrix)
    }

    /// One table per architecture: datasets as rows, representations as
    /// columns, accuracies as percentages.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Accuracy by representation and architecture\n\n");
        writeln!(out, "- version: {}", self.meta.version).unwrap();
        writeln!(out, "- profile: {}", self.meta.profile).unwrap();
        writeln!(out, "- stop list sha256: {}", self.meta.stoplist_sha256).unwrap();
        out.push('\n');

        let keys = self.rows.keys().chain(self.absent.keys());
        let mut datasets: Vec<Source> = keys.clone().map(|k| k.dataset).collect();
        datasets.sort_by_key(|d| d.to_string());
        datasets.dedup();

        let cell = |key: &CellKey| match self.rows.get(key) {
            Some(r) if r.divergent => format!("{:.2}% (diverged)", r.accuracy * 100.0),
            Some(r) => format!("{:.2}%", r.accuracy * 100.0),
            None => "n/a".to_string(),
        };

        for arch in Architecture::NEURAL {
            writeln!(out, "## {}\n", arch.title()).unwrap();
            let titles: Vec<&str> = Representation::ALL.iter().map(|r| r.title()).collect();
            writeln!(out, "| Dataset | {} |", titles.join(" | ")).unwrap();
            writeln!(out, "|---|{}", "---|".repeat(titles.len())).unwrap();
            for &d in &datasets {
                let cells: Vec<String> = Representation::ALL
                    .iter()
                    .map(|&r| cell(&CellKey::new(d, Some(r), arch)))
                    .collect();
                writeln!(out, "| {} | {} |", dataset_title(d), cells.join(" | ")).unwrap();
            }
            out.push('\n');
        }

        let baselines: Vec<&ResultRow> = self
            .rows
            .values()
            .filter(|r| r.key.architecture == Architecture::Baseline)
            .collect();
        if !baselines.is_empty() {
            writeln!(out, "## {}\n", Architecture::Baseline.title()).unwrap();
            out.push_str("| Dataset | Accuracy |\n|---|---|\n");
            for r in baselines {
                writeln!(out, "| {} | {} |", dataset_title(r.key.dataset), cell(&r.key)).unwrap();
            }
            out.push('\n');
        }

        if !self.absent.is_empty() {
            out.push_str("## Missing cells\n\n");
            for (key, reason) in &self.absent {
                writeln!(out, "- {}: {}", key.slug(), reason).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_markdown(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_markdown()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

fn dataset_title(d: Source) -> &'static str {
    match d {
        Source::Liar => "LIAR",
        Source::Kaggle => "Kaggle",
        Source::Fixture => "Fixture",
    }
}

fn parse_key(dataset: &str, rep: &str, arch: &str) -> Result<CellKey> {
    let dataset: Source = dataset.parse()?;
    let representation = match rep {
        "-" => None,
        r => Some(r.parse()?),
    };
    Ok(CellKey::new(dataset, representation, arch.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(dataset: Source, rep: Option<Representation>, arch: Architecture, acc: f64) -> ResultRow {
        ResultRow {
            key: CellKey::new(dataset, rep, arch),
            accuracy: acc,
            n_train: 160,
            n_test: 40,
            epochs: 5,
            seed: 12345678901234567890,
            wall_time_s: None,
            drop_count: 0,
            divergent: false,
        }
    }

    fn sample() -> ResultsMatrix {
        let mut m = ResultsMatrix::new(ReportMeta {
            version: "0.1.0".into(),
            profile: "full".into(),
            stoplist_sha256: "ab".repeat(32),
            config_json: r#"{"seed":1,"a":[1,2]}"#.into(),
        });
        m.insert(row(Source::Kaggle, Some(Representation::Tfidf), Architecture::Ann, 0.9659)).unwrap();
        let mut timed = row(Source::Liar, Some(Representation::D2v), Architecture::Rnn, 1.0 / 3.0);
        timed.wall_time_s = Some(12.25);
        timed.divergent = true;
        m.insert(timed).unwrap();
        m.insert(row(Source::Liar, None, Architecture::Baseline, 0.5417)).unwrap();
        m.mark_absent(
            CellKey::new(Source::Kaggle, Some(Representation::Onehot), Architecture::Cnn),
            "data error: missing\nfile",
        )
        .unwrap();
        m
    }

    #[test]
    fn csv_round_trip() {
        let m = sample();
        let csv = m.to_csv();
        let back = ResultsMatrix::from_csv(&csv).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_csv(), csv);
    }

    #[test]
    fn markdown_percentages() {
        let md = sample().to_markdown();
        assert!(md.contains("| Kaggle | n/a | 96.59% | n/a | n/a |"), "{md}");
        assert!(md.contains("33.33% (diverged)"));
        assert!(md.contains("| LIAR | 54.17% |"));
        assert!(md.contains("kaggle_onehot_cnn: data error: missing file"));
    }

    #[test]
    fn empty_matrix_has_headers() {
        let m = ResultsMatrix::default();
        let csv = m.to_csv();
        assert!(csv.ends_with(&format!("{}\n", CSV_COLUMNS.join(","))));
        assert_eq!(ResultsMatrix::from_csv(&csv).unwrap(), m);
        let md = m.to_markdown();
        assert!(md.contains("| Dataset | One-hot | TFIDF | Word2Vec | Doc2Vec |"));
    }

    #[test]
    fn duplicate_cells_rejected() {
        let mut m = sample();
        assert!(m
            .insert(row(Source::Kaggle, Some(Representation::Tfidf), Architecture::Ann, 0.5))
            .is_err());
        assert!(ResultsMatrix::from_csv("nope\n").is_err());
    }
}
