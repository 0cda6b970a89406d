//! Feature representations of participants: crowd-aggregated attribute
//! vectors, external attribute sets and a tf-idf bag of words.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature rows are not aligned: {0}")]
    Alignment(String),
    #[error("feature value at row `{row}`, column `{col}` is {value}: {reason}")]
    BadValue {
        row: String,
        col: String,
        value: f64,
        reason: &'static str,
    },
    #[error("feature matrix shape mismatch: {0}")]
    Shape(String),
    #[error("cannot vectorize: every document is empty after tokenization")]
    EmptyCorpus,
    #[error("feature file schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Attributes24,
    External,
    Combined,
    Tfidf,
}

impl Provenance {
    fn bounded(self) -> bool {
        !matches!(self, Provenance::Tfidf)
    }
}

/// An n×d real matrix whose rows are participants.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<String>,
    cols: Vec<String>,
    values: Vec<f64>,
    provenance: Provenance,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major `values`, checking finiteness and, for
    /// attribute provenances, the `[0, 1]` range.
    pub fn new(
        rows: Vec<String>,
        cols: Vec<String>,
        values: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self, FeatureError> {
        if values.len() != rows.len() * cols.len() {
            return Err(FeatureError::Shape(format!(
                "{} values for {}x{}",
                values.len(),
                rows.len(),
                cols.len()
            )));
        }
        let d = cols.len();
        for (idx, &v) in values.iter().enumerate() {
            let reason = if !v.is_finite() {
                Some("not finite")
            } else if provenance.bounded() && !(0.0..=1.0).contains(&v) {
                Some("outside [0, 1]")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(FeatureError::BadValue {
                    row: rows[idx / d].clone(),
                    col: cols[idx % d].clone(),
                    value: v,
                    reason,
                });
            }
        }
        Ok(FeatureMatrix {
            rows,
            cols,
            values,
            provenance,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.cols.len()
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn cols(&self) -> &[String] {
        &self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.d();
        &self.values[i * d..(i + 1) * d]
    }

    /// Reorders rows to follow `ids`; every id must be present exactly once.
    pub fn aligned_to(&self, ids: &[String]) -> Result<FeatureMatrix, FeatureError> {
        if ids.len() != self.n() {
            return Err(FeatureError::Alignment(format!(
                "{} feature rows for {} participants",
                self.n(),
                ids.len()
            )));
        }
        let pos: BTreeMap<&str, usize> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.as_str(), i))
            .collect();
        let mut values = Vec::with_capacity(self.values.len());
        for id in ids {
            let i = *pos
                .get(id.as_str())
                .ok_or_else(|| FeatureError::Alignment(format!("no feature row for `{id}`")))?;
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix::new(ids.to_vec(), self.cols.clone(), values, self.provenance)
    }

    /// Writes `id,<col_1>,...` followed by one line per row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), FeatureError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["id".to_string()];
        header.extend(self.cols.iter().cloned());
        out.write_record(&header)?;
        for (i, id) in self.rows.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.row(i).iter().map(|v| format!("{v}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads an `id,<col_1>,...` CSV. With `raw_scale`, values are on the
    /// 0–5 crowd scale and are divided by 5.
    pub fn read_csv<R: Read>(
        r: R,
        provenance: Provenance,
        raw_scale: bool,
    ) -> Result<FeatureMatrix, FeatureError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("id") {
            return Err(FeatureError::Schema("missing column `id`".into()));
        }
        let cols: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        if cols.is_empty() {
            return Err(FeatureError::Schema("no feature columns".into()));
        }
        let mut seen = HashSet::new();
        for c in &cols {
            if !seen.insert(c.as_str()) {
                return Err(FeatureError::Schema(format!("duplicate column `{c}`")));
            }
        }
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let id = rec.get(0).unwrap_or_default().to_string();
            for (j, col) in cols.iter().enumerate() {
                let raw = rec.get(j + 1).unwrap_or_default();
                let v: f64 = raw.parse().map_err(|_| {
                    FeatureError::Schema(format!("row `{id}`, column `{col}`: `{raw}` is not a number"))
                })?;
                if raw_scale && !(0.0..=5.0).contains(&v) {
                    return Err(FeatureError::BadValue {
                        row: id,
                        col: col.clone(),
                        value: v,
                        reason: "outside the raw [0, 5] scale",
                    });
                }
                values.push(if raw_scale { v / 5.0 } else { v });
            }
            rows.push(id);
        }
        if rows.is_empty() {
            return Err(FeatureError::Schema("no data rows".into()));
        }
        FeatureMatrix::new(rows, cols, values, provenance)
    }

    pub fn read_csv_path(
        path: &Path,
        provenance: Provenance,
        raw_scale: bool,
    ) -> Result<FeatureMatrix, FeatureError> {
        FeatureMatrix::read_csv(std::fs::File::open(path)?, provenance, raw_scale)
    }
}

/// Which attribute columns make up a representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttributeSet {
    /// The crowd-aggregated attributes alone.
    Ours,
    /// An external attribute set alone (e.g. IBM-13, LIWC-19).
    ExternalOnly,
    /// Crowd attributes followed by the external ones (e.g. 24+13=37).
    Combined,
}

pub fn select_attributes(
    ours: &FeatureMatrix,
    external: Option<&FeatureMatrix>,
    set: AttributeSet,
) -> Result<FeatureMatrix, FeatureError> {
    let ext = || {
        let ext = external.ok_or_else(|| {
            FeatureError::Alignment("an external attribute set is required".into())
        })?;
        if ext.rows != ours.rows {
            return Err(FeatureError::Alignment(
                "external rows do not match participant order".into(),
            ));
        }
        Ok(ext)
    };
    match set {
        AttributeSet::Ours => Ok(ours.clone()),
        AttributeSet::ExternalOnly => {
            let e = ext()?;
            let mut m = e.clone();
            m.provenance = Provenance::External;
            Ok(m)
        }
        AttributeSet::Combined => {
            let e = ext()?;
            concat_columns(ours, e)
        }
    }
}

fn concat_columns(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
    if a.rows != b.rows {
        return Err(FeatureError::Alignment("row ids differ".into()));
    }
    let mut cols = a.cols.clone();
    cols.extend(b.cols.iter().cloned());
    let mut values = Vec::with_capacity(a.n() * cols.len());
    for i in 0..a.n() {
        values.extend_from_slice(a.row(i));
        values.extend_from_slice(b.row(i));
    }
    let provenance = if a.provenance.bounded() && b.provenance.bounded() {
        Provenance::Combined
    } else {
        Provenance::Tfidf
    };
    FeatureMatrix::new(a.rows.clone(), cols, values, provenance)
}

const STOPWORDS_TXT: &str = include_str!("../data/stopwords.txt");

/// The shipped English stop-word list, normalized the same way tokens are.
pub fn stopwords() -> &'static HashSet<String> {
    static WORDS: std::sync::OnceLock<HashSet<String>> = std::sync::OnceLock::new();
    WORDS.get_or_init(|| parse_stopwords(STOPWORDS_TXT))
}

/// Parses a one-token-per-line stop-word list.
pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(normalize)
        .filter(|w| !w.is_empty())
        .collect()
}

fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect::<String>()
        .trim()
        .to_string()
}

/// Lowercases, deletes punctuation and symbols, splits on whitespace and
/// drops stop words.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with(text, stopwords())
}

pub fn tokenize_with(text: &str, stop: &HashSet<String>) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .map(|c| if c.is_whitespace() { ' ' } else { c })
        .filter(|c| c.is_alphanumeric() || *c == ' ')
        .flat_map(char::to_lowercase)
        .collect();
    cleaned
        .split_whitespace()
        .filter(|t| !stop.contains(*t))
        .map(str::to_string)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    /// Sorted, unique terms.
    pub terms: Vec<String>,
    /// Number of documents containing each term.
    pub document_frequency: Vec<usize>,
}

/// Raw-count tf times `ln(n / df)` idf, rows L2-normalized. Rows that are
/// entirely zero stay zero.
pub fn tfidf(ids: &[String], texts: &[String]) -> Result<(FeatureMatrix, Vocabulary), FeatureError> {
    if ids.len() != texts.len() {
        return Err(FeatureError::Shape(format!(
            "{} ids for {} documents",
            ids.len(),
            texts.len()
        )));
    }
    let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t)).collect();
    let counts: Vec<BTreeMap<&str, usize>> = docs
        .iter()
        .map(|toks| {
            let mut m = BTreeMap::new();
            for t in toks {
                *m.entry(t.as_str()).or_insert(0) += 1;
            }
            m
        })
        .collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &counts {
        for term in c.keys() {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    if df.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let n = texts.len() as f64;
    let index: BTreeMap<&str, usize> = df.keys().enumerate().map(|(j, t)| (*t, j)).collect();
    let idf: Vec<f64> = df.values().map(|&f| (n / f as f64).ln()).collect();
    let d = df.len();

    let mut values = vec![0.0; texts.len() * d];
    for (i, c) in counts.iter().enumerate() {
        let row = &mut values[i * d..(i + 1) * d];
        for (term, &tf) in c {
            let j = index[term];
            row[j] = tf as f64 * idf[j];
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    let vocab = Vocabulary {
        terms: df.keys().map(|t| t.to_string()).collect(),
        document_frequency: df.values().copied().collect(),
    };
    let m = FeatureMatrix::new(ids.to_vec(), vocab.terms.clone(), values, Provenance::Tfidf)?;
    Ok((m, vocab))
}
