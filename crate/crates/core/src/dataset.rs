//! Participants, their game choices and crowd-sourced attribute judgments.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, FeatureMatrix, Provenance};
use crate::games::GameSpec;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("duplicate participant id `{0}`")]
    DuplicateId(String),
    #[error("participant `{participant}` has illegal action `{action}` for game `{game}`")]
    IllegalAction {
        participant: String,
        game: String,
        action: String,
    },
    #[error("participant `{participant}`: {reason}")]
    BadField { participant: String, reason: String },
    #[error("text `{text}` has no surviving judgments for attribute `{attribute}`")]
    Coverage { text: String, attribute: String },
    #[error("invalid judgment on row {row}: {reason}")]
    BadJudgment { row: usize, reason: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unspecified,
}

impl Gender {
    pub fn parse(s: &str) -> Gender {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Gender::Male,
            "female" | "f" => Gender::Female,
            _ => Gender::Unspecified,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unspecified => "unspecified",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Participant {
    pub id: String,
    pub gender: Gender,
    pub age: u32,
    pub text_ref: String,
    /// Action index per game, aligned with [`Dataset::games`].
    pub choices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub participants: Vec<Participant>,
    pub games: Vec<GameSpec>,
    /// Attribute vectors (rows aligned with `participants`), if loaded.
    pub attributes: Option<FeatureMatrix>,
    /// Directory that relative `text_ref`s resolve against.
    pub text_root: Option<PathBuf>,
}

impl Dataset {
    pub fn new(
        participants: Vec<Participant>,
        games: Vec<GameSpec>,
        attributes: Option<FeatureMatrix>,
    ) -> Result<Self, DatasetError> {
        if participants.is_empty() {
            return Err(DatasetError::Schema("no participant rows".into()));
        }
        let mut seen = HashSet::new();
        for p in &participants {
            if !seen.insert(p.id.as_str()) {
                return Err(DatasetError::DuplicateId(p.id.clone()));
            }
            if p.choices.len() != games.len() {
                return Err(DatasetError::BadField {
                    participant: p.id.clone(),
                    reason: format!("{} choices for {} games", p.choices.len(), games.len()),
                });
            }
            for (g, &c) in games.iter().zip(&p.choices) {
                if c >= g.num_actions() {
                    return Err(DatasetError::IllegalAction {
                        participant: p.id.clone(),
                        game: g.name.clone(),
                        action: c.to_string(),
                    });
                }
            }
        }
        let attributes = match attributes {
            Some(a) => Some(a.aligned_to(&participants.iter().map(|p| p.id.clone()).collect::<Vec<_>>())?),
            None => None,
        };
        Ok(Dataset {
            participants,
            games,
            attributes,
            text_root: None,
        })
    }

    pub fn n(&self) -> usize {
        self.participants.len()
    }

    pub fn ids(&self) -> Vec<String> {
        self.participants.iter().map(|p| p.id.clone()).collect()
    }

    pub fn game_index(&self, name: &str) -> Option<usize> {
        self.games.iter().position(|g| g.name.eq_ignore_ascii_case(name))
    }

    /// Action indices of every participant in game `g`.
    pub fn labels(&self, g: usize) -> Vec<usize> {
        self.participants.iter().map(|p| p.choices[g]).collect()
    }

    pub fn attribute_names(&self) -> &[String] {
        self.attributes.as_ref().map(|a| a.cols()).unwrap_or(&[])
    }

    pub fn text_path(&self, p: &Participant) -> PathBuf {
        match &self.text_root {
            Some(root) => root.join(&p.text_ref),
            None => PathBuf::from(&p.text_ref),
        }
    }

    /// Reads every participant's text file.
    pub fn read_texts(&self) -> Result<Vec<String>, DatasetError> {
        self.participants
            .iter()
            .map(|p| Ok(std::fs::read_to_string(self.text_path(p))?))
            .collect()
    }

    /// Writes the canonical participants CSV.
    pub fn write_participants_csv<W: std::io::Write>(&self, w: W) -> Result<(), DatasetError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["id", "gender", "age", "text_file"].map(String::from).to_vec();
        header.extend(self.games.iter().map(|g| g.name.clone()));
        out.write_record(&header)?;
        for p in &self.participants {
            let mut rec = vec![
                p.id.clone(),
                p.gender.as_str().to_string(),
                p.age.to_string(),
                p.text_ref.clone(),
            ];
            rec.extend(self.games.iter().zip(&p.choices).map(|(g, &c)| g.actions[c].clone()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Attribute values are on the raw 0–5 scale and get divided by 5.
    pub raw_scale: bool,
}

/// Parses `id,gender,age,text_file,<game_1>,...` rows.
pub fn read_participants<R: Read>(r: R, games: &[GameSpec]) -> Result<Vec<Participant>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };
    let id_col = col("id")?;
    let gender_col = col("gender")?;
    let age_col = col("age")?;
    let text_col = col("text_file")?;
    let game_cols: Vec<usize> = games.iter().map(|g| col(&g.name)).collect::<Result<_, _>>()?;

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or_default();
        let id = get(id_col).to_string();
        if id.is_empty() {
            return Err(DatasetError::Schema(format!("empty id on row {}", out.len() + 1)));
        }
        let age = get(age_col).parse::<u32>().map_err(|_| DatasetError::BadField {
            participant: id.clone(),
            reason: format!("age `{}` is not a whole number", get(age_col)),
        })?;
        let choices = games
            .iter()
            .zip(&game_cols)
            .map(|(g, &c)| {
                g.action_index(get(c)).ok_or_else(|| DatasetError::IllegalAction {
                    participant: id.clone(),
                    game: g.name.clone(),
                    action: get(c).to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(Participant {
            id,
            gender: Gender::parse(get(gender_col)),
            age,
            text_ref: get(text_col).to_string(),
            choices,
        });
    }
    if out.is_empty() {
        return Err(DatasetError::Schema("no participant rows".into()));
    }
    Ok(out)
}

pub fn load_dataset(
    participants_path: &Path,
    attributes_path: Option<&Path>,
    games: &[GameSpec],
    opts: &LoadOptions,
) -> Result<Dataset, DatasetError> {
    let participants = read_participants(std::fs::File::open(participants_path)?, games)?;
    let attributes = match attributes_path {
        Some(p) => Some(FeatureMatrix::read_csv_path(p, Provenance::Attributes24, opts.raw_scale)?),
        None => None,
    };
    let mut ds = Dataset::new(participants, games.to_vec(), attributes)?;
    ds.text_root = participants_path.parent().map(Path::to_path_buf);
    Ok(ds)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerJudgment {
    pub worker_id: String,
    pub text_id: String,
    pub attribute: String,
    pub score: u8,
    pub is_test_question: bool,
    /// Inclusive band of acceptable scores, present iff `is_test_question`.
    pub expected_interval: Option<(u8, u8)>,
}

impl WorkerJudgment {
    pub fn validate(&self) -> Result<(), String> {
        if self.score > 5 {
            return Err(format!("score {} outside 0..5", self.score));
        }
        match (self.is_test_question, self.expected_interval) {
            (true, Some((lo, hi))) if lo <= hi && hi <= 5 => Ok(()),
            (true, Some((lo, hi))) => Err(format!("bad interval {lo}-{hi}")),
            (true, None) => Err("test question without interval".into()),
            (false, Some(_)) => Err("interval on a non-test question".into()),
            (false, None) => Ok(()),
        }
    }

    fn passes(&self) -> bool {
        self.expected_interval
            .is_some_and(|(lo, hi)| (lo..=hi).contains(&self.score))
    }
}

/// Parses `worker_id,text_id,attribute,score,is_test,lo,hi` rows.
pub fn read_judgments<R: Read>(r: R) -> Result<Vec<WorkerJudgment>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers()?.clone();
    let names = ["worker_id", "text_id", "attribute", "score", "is_test", "lo", "hi"];
    let cols: Vec<usize> = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| DatasetError::MissingColumn(n.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = row + 1;
        let get = |i: usize| rec.get(cols[i]).unwrap_or_default();
        let bad = |reason: String| DatasetError::BadJudgment { row, reason };
        let num = |i: usize| -> Result<Option<u8>, DatasetError> {
            let s = get(i);
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<u8>()
                .map(Some)
                .map_err(|_| bad(format!("`{s}` in column `{}` is not an integer 0..5", names[i])))
        };
        let score = num(3)?.ok_or_else(|| bad("missing score".into()))?;
        let is_test = match get(4).to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" => true,
            "0" | "false" | "no" | "" => false,
            other => return Err(bad(format!("`{other}` is not a boolean"))),
        };
        let interval = match (num(5)?, num(6)?) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            (None, None) => None,
            _ => return Err(bad("only one of lo/hi given".into())),
        };
        let j = WorkerJudgment {
            worker_id: get(0).to_string(),
            text_id: get(1).to_string(),
            attribute: get(2).to_string(),
            score,
            is_test_question: is_test,
            expected_interval: interval,
        };
        j.validate().map_err(bad)?;
        out.push(j);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkerStatus {
    pub worker_id: String,
    pub test_questions: usize,
    pub test_passed: usize,
    /// Fraction of test questions answered inside the interval; 0 when the
    /// worker saw none.
    pub success_rate: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregation {
    /// Rows are text ids (sorted), columns are attributes.
    pub matrix: FeatureMatrix,
    pub workers: Vec<WorkerStatus>,
    /// Cells with fewer surviving estimates than requested.
    pub short_cells: Vec<(String, String, usize)>,
}

impl Aggregation {
    pub fn excluded_fraction(&self) -> f64 {
        if self.workers.is_empty() {
            return 0.0;
        }
        self.workers.iter().filter(|w| !w.passed).count() as f64 / self.workers.len() as f64
    }
}

/// Filters workers on test-question accuracy and averages the surviving
/// non-test scores per (text, attribute) cell, rescaled to `[0, 1]`.
///
/// Attribute columns follow `attribute_order` when given, else sorted order.
pub fn aggregate_judgments(
    judgments: &[WorkerJudgment],
    pass_threshold: f64,
    required_estimates: usize,
    attribute_order: Option<&[String]>,
) -> Result<Aggregation, DatasetError> {
    let mut tests: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for j in judgments {
        let e = tests.entry(j.worker_id.as_str()).or_insert((0, 0));
        if j.is_test_question {
            e.0 += 1;
            if j.passes() {
                e.1 += 1;
            }
        }
    }
    let workers: Vec<WorkerStatus> = tests
        .iter()
        .map(|(&w, &(total, ok))| {
            let success_rate = if total == 0 { 0.0 } else { ok as f64 / total as f64 };
            WorkerStatus {
                worker_id: w.to_string(),
                test_questions: total,
                test_passed: ok,
                success_rate,
                passed: total > 0 && success_rate >= pass_threshold,
            }
        })
        .collect();
    let passed: HashSet<&str> = workers
        .iter()
        .filter(|w| w.passed)
        .map(|w| w.worker_id.as_str())
        .collect();

    // texts seen only through test questions are not part of the corpus
    let texts: Vec<&str> = judgments
        .iter()
        .filter(|j| !j.is_test_question)
        .map(|j| j.text_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let attributes: Vec<String> = match attribute_order {
        Some(order) => order.to_vec(),
        None => judgments
            .iter()
            .filter(|j| !j.is_test_question)
            .map(|j| j.attribute.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let attr_index: BTreeMap<&str, usize> = attributes
        .iter()
        .enumerate()
        .map(|(i, a)| (a.as_str(), i))
        .collect();
    let text_index: BTreeMap<&str, usize> = texts.iter().enumerate().map(|(i, t)| (*t, i)).collect();

    // integer sums keep the mean independent of judgment order
    let d = attributes.len();
    let mut sums = vec![(0u64, 0usize); texts.len() * d];
    for j in judgments {
        if j.is_test_question || !passed.contains(j.worker_id.as_str()) {
            continue;
        }
        let Some(&a) = attr_index.get(j.attribute.as_str()) else {
            continue;
        };
        let cell = &mut sums[text_index[j.text_id.as_str()] * d + a];
        cell.0 += u64::from(j.score);
        cell.1 += 1;
    }
    let mut values = Vec::with_capacity(sums.len());
    let mut short_cells = Vec::new();
    for (idx, &(sum, count)) in sums.iter().enumerate() {
        let text = texts[idx / d];
        let attribute = &attributes[idx % d];
        if count == 0 {
            return Err(DatasetError::Coverage {
                text: text.to_string(),
                attribute: attribute.clone(),
            });
        }
        if count < required_estimates {
            short_cells.push((text.to_string(), attribute.clone(), count));
        }
        values.push(sum as f64 / (5 * count) as f64);
    }
    let matrix = FeatureMatrix::new(
        texts.iter().map(|t| t.to_string()).collect(),
        attributes,
        values,
        Provenance::Attributes24,
    )?;
    Ok(Aggregation {
        matrix,
        workers,
        short_cells,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgeStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub std: f64,
}

impl AgeStats {
    fn of(ages: &[u32]) -> Option<AgeStats> {
        if ages.is_empty() {
            return None;
        }
        let n = ages.len();
        let mean = ages.iter().map(|&a| f64::from(a)).sum::<f64>() / n as f64;
        let mut sorted = ages.to_vec();
        sorted.sort_unstable();
        let median = if n % 2 == 1 {
            f64::from(sorted[n / 2])
        } else {
            (f64::from(sorted[n / 2 - 1]) + f64::from(sorted[n / 2])) / 2.0
        };
        let std = if n > 1 {
            (ages.iter().map(|&a| (f64::from(a) - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(AgeStats {
            count: n,
            mean,
            median,
            std,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSummary {
    pub game: String,
    pub actions: Vec<String>,
    pub counts: Vec<usize>,
    pub proportions: Vec<f64>,
    pub counts_by_gender: BTreeMap<String, Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub participants: usize,
    pub gender_counts: BTreeMap<String, usize>,
    pub age: Option<AgeStats>,
    pub age_by_gender: BTreeMap<String, AgeStats>,
    pub games: Vec<GameSummary>,
}

impl SummaryReport {
    pub fn game(&self, name: &str) -> Option<&GameSummary> {
        self.games.iter().find(|g| g.game == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

pub fn summarize(ds: &Dataset) -> SummaryReport {
    let n = ds.n();
    let mut gender_counts = BTreeMap::new();
    let mut ages_by_gender: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    for p in &ds.participants {
        *gender_counts.entry(p.gender.as_str().to_string()).or_insert(0) += 1;
        ages_by_gender
            .entry(p.gender.as_str().to_string())
            .or_default()
            .push(p.age);
    }
    let all_ages: Vec<u32> = ds.participants.iter().map(|p| p.age).collect();
    let games = ds
        .games
        .iter()
        .enumerate()
        .map(|(g, spec)| {
            let mut counts = vec![0; spec.num_actions()];
            let mut by_gender: BTreeMap<String, Vec<usize>> = BTreeMap::new();
            for p in &ds.participants {
                counts[p.choices[g]] += 1;
                by_gender
                    .entry(p.gender.as_str().to_string())
                    .or_insert_with(|| vec![0; spec.num_actions()])[p.choices[g]] += 1;
            }
            GameSummary {
                game: spec.name.clone(),
                actions: spec.actions.clone(),
                proportions: counts.iter().map(|&c| c as f64 / n as f64).collect(),
                counts,
                counts_by_gender: by_gender,
            }
        })
        .collect();
    SummaryReport {
        participants: n,
        gender_counts,
        age: AgeStats::of(&all_ages),
        age_by_gender: ages_by_gender
            .into_iter()
            .filter_map(|(g, a)| AgeStats::of(&a).map(|s| (g, s)))
            .collect(),
        games,
    }
}
