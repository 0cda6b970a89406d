//! Monte Carlo evaluation protocol.
//!
//! Every repetition draws a uniform random train/test split, runs each
//! configured classifier on it for every game and hyper-parameter, and
//! records the evaluation measures. Means are accumulated in fixed
//! repetition order, so the table does not depend on the thread count.
//!
//! Clustering never sees labels or splits: one dendrogram per feature set is
//! built up front and its cuts are shared by all repetitions and games.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classifiers::{
    self, Expectation, KnnIndex, LabeledSplit, MvcScope, RandomGuesser, Split, TacOptions, TacScratch,
};
use crate::clustering::{self, ClusterAssignment, ClusterError};
use crate::dataset::Dataset;
use crate::features::FeatureMatrix;
use crate::metrics::{self, ConfusionMatrix, SummaryMeasure};
use crate::rng;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Classifier(#[from] classifiers::ClassifierError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Tac,
    Knn,
    Mvc,
    Erg,
    Ewg,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Tac => "TAC",
            ClassifierKind::Knn => "K-NN",
            ClassifierKind::Mvc => "MVC",
            ClassifierKind::Erg => "ERG",
            ClassifierKind::Ewg => "EWG",
        }
    }

    fn uses_features(self) -> bool {
        matches!(self, ClassifierKind::Tac | ClassifierKind::Knn)
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Inclusive integer range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub start: usize,
    pub end: usize,
}

impl IntRange {
    pub fn new(start: usize, end: usize) -> Self {
        IntRange { start, end }
    }

    pub fn iter(self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }

    pub fn len(self) -> usize {
        (self.end + 1).saturating_sub(self.start)
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

fn default_repetitions() -> usize {
    5000
}
fn default_train_fraction() -> f64 {
    0.9
}
fn default_k_range() -> IntRange {
    IntRange::new(2, 30)
}
fn default_knn_range() -> IntRange {
    IntRange::new(1, 5)
}
fn default_classifiers() -> Vec<ClassifierKind> {
    vec![
        ClassifierKind::Tac,
        ClassifierKind::Knn,
        ClassifierKind::Mvc,
        ClassifierKind::Erg,
        ClassifierKind::Ewg,
    ]
}
fn default_feature_sets() -> Vec<String> {
    vec![OURS.to_string()]
}
fn default_selection() -> SummaryMeasure {
    SummaryMeasure::MavF1
}

/// Feature-set name under which the dataset's own attribute vectors are
/// registered.
pub const OURS: &str = "ours24";

/// Feature-set label used for classifiers that ignore features.
pub const NO_FEATURES: &str = "-";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Cluster counts swept for TAC.
    #[serde(default = "default_k_range")]
    pub k_range: IntRange,
    /// Neighbor counts swept for K-NN.
    #[serde(default = "default_knn_range", alias = "K_range")]
    pub knn_range: IntRange,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default = "default_feature_sets")]
    pub feature_sets: Vec<String>,
    /// Game names; empty means every game of the dataset.
    #[serde(default)]
    pub games: Vec<String>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_selection")]
    pub selection_metric: SummaryMeasure,
    #[serde(default)]
    pub mvc_scope: MvcScope,
    #[serde(default)]
    pub tac: TacOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            repetitions: default_repetitions(),
            train_fraction: default_train_fraction(),
            k_range: default_k_range(),
            knn_range: default_knn_range(),
            classifiers: default_classifiers(),
            feature_sets: default_feature_sets(),
            games: Vec::new(),
            master_seed: 0,
            selection_metric: default_selection(),
            mvc_scope: MvcScope::default(),
            tac: TacOptions::default(),
        }
    }
}

impl ExperimentConfig {
    /// `round_half_up((1 - train_fraction) * n)`, kept inside `1..n`.
    pub fn test_size(&self, n: usize) -> usize {
        // the epsilon keeps exact halves such as 0.1 * 15 from rounding down
        let raw = ((1.0 - self.train_fraction) * n as f64 + 0.5 + 1e-9).floor() as usize;
        raw.clamp(1, n.saturating_sub(1).max(1))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(HarnessError::Config(format!(
                "train_fraction {} must lie strictly between 0 and 1",
                self.train_fraction
            )));
        }
        if self.repetitions == 0 {
            return Err(HarnessError::Config("repetitions must be positive".into()));
        }
        if self.k_range.is_empty() || self.k_range.start == 0 {
            return Err(HarnessError::Config("k_range must be a nonempty range of positive values".into()));
        }
        if self.knn_range.is_empty() || self.knn_range.start == 0 {
            return Err(HarnessError::Config("K_range must be a nonempty range of positive values".into()));
        }
        Ok(())
    }
}

/// Key of one result cell. `hyperparam` is the cluster count for TAC, the
/// neighbor count for K-NN and absent otherwise.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub classifier: String,
    pub feature_set: String,
    pub game: String,
    pub hyperparam: Option<usize>,
    pub metric: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub mean: f64,
    /// Standard error of the mean over repetitions.
    pub std_err: f64,
    /// Repetitions averaged; 0 marks an analytic expectation.
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    /// Game name and its actions, in registry order.
    pub games: Vec<(String, Vec<String>)>,
    pub cells: BTreeMap<CellKey, CellStats>,
}

impl ResultTable {
    pub fn get(
        &self,
        classifier: &str,
        feature_set: &str,
        game: &str,
        hyperparam: Option<usize>,
        metric: &str,
    ) -> Option<CellStats> {
        self.cells
            .get(&CellKey {
                classifier: classifier.to_string(),
                feature_set: feature_set.to_string(),
                game: game.to_string(),
                hyperparam,
                metric: metric.to_string(),
            })
            .copied()
    }

    pub fn mean(
        &self,
        classifier: &str,
        feature_set: &str,
        game: &str,
        hyperparam: Option<usize>,
        metric: &str,
    ) -> Option<f64> {
        self.get(classifier, feature_set, game, hyperparam, metric).map(|c| c.mean)
    }

    /// Distinct `(classifier, feature_set)` rows in key order.
    pub fn models(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self
            .cells
            .keys()
            .map(|k| (k.classifier.clone(), k.feature_set.clone()))
            .collect();
        out.dedup();
        out
    }

    pub fn hyperparams(&self, classifier: &str, feature_set: &str, game: &str) -> Vec<Option<usize>> {
        let mut hs: Vec<Option<usize>> = self
            .cells
            .keys()
            .filter(|k| k.classifier == classifier && k.feature_set == feature_set && k.game == game)
            .map(|k| k.hyperparam)
            .collect();
        hs.dedup();
        hs
    }

    /// All metric means for one configuration.
    pub fn row(
        &self,
        classifier: &str,
        feature_set: &str,
        game: &str,
        hyperparam: Option<usize>,
    ) -> BTreeMap<String, f64> {
        self.cells
            .iter()
            .filter(|(k, _)| {
                k.classifier == classifier
                    && k.feature_set == feature_set
                    && k.game == game
                    && k.hyperparam == hyperparam
            })
            .map(|(k, v)| (k.metric.clone(), v.mean))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), HarnessError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "classifier",
            "feature_set",
            "game",
            "hyperparam",
            "metric",
            "mean",
            "std_err",
            "count",
        ])?;
        for (k, v) in &self.cells {
            out.write_record([
                k.classifier.clone(),
                k.feature_set.clone(),
                k.game.clone(),
                k.hyperparam.map(|h| h.to_string()).unwrap_or_default(),
                k.metric.clone(),
                fmt_score(v.mean),
                fmt_score(v.std_err),
                v.count.to_string(),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a long-format results file; `games` supplies the action order
    /// of every game mentioned.
    pub fn read_csv<R: std::io::Read>(
        r: R,
        games: Vec<(String, Vec<String>)>,
    ) -> Result<ResultTable, HarnessError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut cells = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let f = |i: usize| rec.get(i).unwrap_or_default();
            let num = |i: usize| -> Result<f64, HarnessError> {
                f(i).parse()
                    .map_err(|_| HarnessError::Config(format!("`{}` is not a number", f(i))))
            };
            let hyperparam = match f(3) {
                "" => None,
                s => Some(
                    s.parse()
                        .map_err(|_| HarnessError::Config(format!("bad hyperparam `{s}`")))?,
                ),
            };
            if !games.iter().any(|(g, _)| g == f(2)) {
                return Err(HarnessError::Config(format!("unknown game `{}` in results", f(2))));
            }
            cells.insert(
                CellKey {
                    classifier: f(0).to_string(),
                    feature_set: f(1).to_string(),
                    game: f(2).to_string(),
                    hyperparam,
                    metric: f(4).to_string(),
                },
                CellStats {
                    mean: num(5)?,
                    std_err: num(6)?,
                    count: num(7)? as usize,
                },
            );
        }
        Ok(ResultTable { games, cells })
    }
}

fn fmt_score(v: f64) -> String {
    format!("{v:.6}")
}

/// Metric names recorded per cell for a game with these actions.
pub fn metric_names(actions: &[String]) -> Vec<String> {
    let mut names: Vec<String> = [SummaryMeasure::Accuracy, SummaryMeasure::MavF1, SummaryMeasure::MwavF1]
        .iter()
        .map(|m| m.to_string())
        .collect();
    names.extend(actions.iter().map(|a| format!("f1:{a}")));
    names
}

/// Writes `[accuracy, mav-f1, mwav-f1, f1 per class]` into `out`.
fn score_into(cm: &ConfusionMatrix, out: &mut [f64]) {
    let classes = metrics::per_class_prf(cm);
    let agg = metrics::aggregate_with(cm, &classes);
    out[0] = agg.accuracy;
    out[1] = agg.mav_f1;
    out[2] = agg.mwav_f1;
    for (slot, c) in out[3..].iter_mut().zip(&classes) {
        *slot = c.f1;
    }
}

/// One evaluated configuration inside a repetition.
#[derive(Clone, Debug)]
struct Unit {
    kind: ClassifierKind,
    /// Index into the prepared feature sets.
    feature: Option<usize>,
    game: usize,
    hyperparam: Option<usize>,
    /// Offset of this unit's metrics in the per-repetition vector.
    offset: usize,
}

struct Prepared<'a> {
    names: Vec<String>,
    cuts: Vec<Option<BTreeMap<usize, ClusterAssignment>>>,
    knn: Vec<Option<KnnIndex>>,
    _features: Vec<&'a FeatureMatrix>,
}

/// Instrumentation of a run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Dendrograms built, one per feature set used by TAC.
    pub linkage_calls: usize,
    /// Fingerprint of each feature set's dendrogram.
    pub dendrograms: BTreeMap<String, String>,
}

const CHUNK: usize = 50;

pub fn run_experiment(
    config: &ExperimentConfig,
    dataset: &Dataset,
    features: &BTreeMap<String, FeatureMatrix>,
) -> Result<ResultTable, HarnessError> {
    run_experiment_with(config, dataset, features, None).map(|(t, _)| t)
}

/// Runs the protocol on `threads` worker threads (default: rayon's global
/// pool). The table is identical for every thread count.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    dataset: &Dataset,
    features: &BTreeMap<String, FeatureMatrix>,
    threads: Option<usize>,
) -> Result<(ResultTable, RunStats), HarnessError> {
    config.validate()?;
    let n = dataset.n();
    if n < 2 {
        return Err(HarnessError::Config("at least two participants are required".into()));
    }
    let game_idx: Vec<usize> = if config.games.is_empty() {
        (0..dataset.games.len()).collect()
    } else {
        config
            .games
            .iter()
            .map(|g| {
                dataset
                    .game_index(g)
                    .ok_or_else(|| HarnessError::Config(format!("unknown game `{g}`")))
            })
            .collect::<Result<_, _>>()?
    };
    let test_size = config.test_size(n);
    let train_size = n - test_size;

    let uses_features = config.classifiers.iter().any(|c| c.uses_features());
    let mut stats = RunStats::default();
    let mut prepared = Prepared {
        names: Vec::new(),
        cuts: Vec::new(),
        knn: Vec::new(),
        _features: Vec::new(),
    };
    if uses_features {
        let ids = dataset.ids();
        for name in &config.feature_sets {
            let fm = features
                .get(name)
                .ok_or_else(|| HarnessError::Config(format!("missing feature set `{name}`")))?;
            if fm.rows() != ids.as_slice() {
                return Err(HarnessError::Config(format!(
                    "feature set `{name}` rows are not aligned with the participants"
                )));
            }
            let cuts = if config.classifiers.contains(&ClassifierKind::Tac) {
                if config.k_range.end > n {
                    return Err(HarnessError::Config(format!(
                        "k up to {} exceeds {n} participants",
                        config.k_range.end
                    )));
                }
                let den = clustering::ward_linkage(fm)?;
                stats.linkage_calls += 1;
                stats.dendrograms.insert(name.clone(), den.fingerprint());
                Some(
                    config
                        .k_range
                        .iter()
                        .map(|k| den.cut(k).map(|a| (k, a)))
                        .collect::<Result<BTreeMap<_, _>, _>>()?,
                )
            } else {
                None
            };
            let knn = if config.classifiers.contains(&ClassifierKind::Knn) {
                if config.knn_range.end > train_size {
                    return Err(HarnessError::Config(format!(
                        "K up to {} exceeds the {train_size} train participants",
                        config.knn_range.end
                    )));
                }
                Some(KnnIndex::new(fm))
            } else {
                None
            };
            prepared.names.push(name.clone());
            prepared.cuts.push(cuts);
            prepared.knn.push(knn);
            prepared._features.push(fm);
        }
    }

    // Lay out evaluation units in a fixed order.
    let mut units = Vec::new();
    let mut offset = 0;
    let mut push = |kind, feature, game: usize, hyperparam| {
        let width = 3 + dataset.games[game].num_actions();
        units.push(Unit {
            kind,
            feature,
            game,
            hyperparam,
            offset,
        });
        offset += width;
    };
    for &kind in &config.classifiers {
        for &g in &game_idx {
            match kind {
                ClassifierKind::Tac => {
                    for f in 0..prepared.names.len() {
                        for k in config.k_range.iter() {
                            push(kind, Some(f), g, Some(k));
                        }
                    }
                }
                ClassifierKind::Knn => {
                    for f in 0..prepared.names.len() {
                        for k in config.knn_range.iter() {
                            push(kind, Some(f), g, Some(k));
                        }
                    }
                }
                ClassifierKind::Mvc => push(kind, None, g, None),
                ClassifierKind::Erg | ClassifierKind::Ewg => {}
            }
        }
    }
    let width = offset;
    let labels: Vec<Vec<usize>> = (0..dataset.games.len()).map(|g| dataset.labels(g)).collect();

    let run_rep = |r: usize, values: &mut [f64]| -> Result<(), HarnessError> {
        let mut split_rng = rng::stream(config.master_seed, &[r as u64, rng::tag("split")]);
        let split = Split::sample(n, test_size, &mut split_rng)?;
        let mut scratch = TacScratch::default();
        let mut pred = Vec::with_capacity(test_size);
        for u in &units {
            let game = &dataset.games[u.game];
            let ls = LabeledSplit::new(&split, &labels[u.game], game.num_actions());
            let fs_name = u.feature.map(|f| prepared.names[f].as_str()).unwrap_or(NO_FEATURES);
            let mut stream = rng::stream(
                config.master_seed,
                &[
                    r as u64,
                    rng::tag(u.kind.name()),
                    rng::tag(fs_name),
                    u.game as u64,
                    u.hyperparam.unwrap_or(0) as u64,
                ],
            );
            match u.kind {
                ClassifierKind::Tac => {
                    let cuts = prepared.cuts[u.feature.expect("tac has features")]
                        .as_ref()
                        .expect("cuts prepared for tac");
                    let assignment = &cuts[&u.hyperparam.expect("tac has k")];
                    classifiers::tac_predict_into(assignment, &ls, config.tac, &mut stream, &mut scratch, &mut pred);
                }
                ClassifierKind::Knn => {
                    let index = prepared.knn[u.feature.expect("knn has features")]
                        .as_ref()
                        .expect("index prepared for knn");
                    index.predict_into(&ls, u.hyperparam.expect("knn has K"), &mut stream, &mut pred)?;
                }
                ClassifierKind::Mvc => {
                    pred.clear();
                    pred.resize(test_size, classifiers::mvc_label(&ls, config.mvc_scope));
                }
                ClassifierKind::Erg | ClassifierKind::Ewg => unreachable!("analytic baselines are not simulated"),
            }
            let cm = ls.confusion(&pred);
            let w = 3 + game.num_actions();
            score_into(&cm, &mut values[u.offset..u.offset + w]);
        }
        Ok(())
    };

    let chunks: Vec<(usize, usize)> = (0..config.repetitions)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(config.repetitions)))
        .collect();
    // per-chunk sums and sums of squares
    type Partial = (Vec<f64>, Vec<f64>);
    let work = || -> Result<Vec<Partial>, HarnessError> {
        chunks
            .par_iter()
            .map(|&(start, end)| {
                let mut sum = vec![0.0; width];
                let mut sumsq = vec![0.0; width];
                let mut values = vec![0.0; width];
                for r in start..end {
                    run_rep(r, &mut values)?;
                    for ((s, q), v) in sum.iter_mut().zip(sumsq.iter_mut()).zip(&values) {
                        *s += v;
                        *q += v * v;
                    }
                }
                Ok((sum, sumsq))
            })
            .collect()
    };
    let partials = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let mut sum = vec![0.0; width];
    let mut sumsq = vec![0.0; width];
    for (s, q) in &partials {
        for i in 0..width {
            sum[i] += s[i];
            sumsq[i] += q[i];
        }
    }

    let reps = config.repetitions;
    let mut cells = BTreeMap::new();
    for u in &units {
        let game = &dataset.games[u.game];
        let fs = u.feature.map(|f| prepared.names[f].clone()).unwrap_or_else(|| NO_FEATURES.to_string());
        for (j, metric) in metric_names(&game.actions).into_iter().enumerate() {
            let i = u.offset + j;
            let mean = sum[i] / reps as f64;
            let var = if reps > 1 {
                ((sumsq[i] - reps as f64 * mean * mean) / (reps - 1) as f64).max(0.0)
            } else {
                0.0
            };
            cells.insert(
                CellKey {
                    classifier: u.kind.name().to_string(),
                    feature_set: fs.clone(),
                    game: game.name.clone(),
                    hyperparam: u.hyperparam,
                    metric,
                },
                CellStats {
                    mean,
                    std_err: (var / reps as f64).sqrt(),
                    count: reps,
                },
            );
        }
    }

    for &kind in &config.classifiers {
        let guesser = match kind {
            ClassifierKind::Erg => RandomGuesser::Erg,
            ClassifierKind::Ewg => RandomGuesser::Ewg,
            _ => continue,
        };
        for &g in &game_idx {
            let game = &dataset.games[g];
            let mut counts = vec![0usize; game.num_actions()];
            for &l in &labels[g] {
                counts[l] += 1;
            }
            let props: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
            let exp = classifiers::expected_random_table(&props, guesser, Expectation::PlugIn)?;
            let mut values = vec![exp.accuracy, exp.mav_f1, exp.mwav_f1];
            values.extend(exp.per_class.iter().map(|c| c.f1));
            for (metric, mean) in metric_names(&game.actions).into_iter().zip(values) {
                cells.insert(
                    CellKey {
                        classifier: kind.name().to_string(),
                        feature_set: NO_FEATURES.to_string(),
                        game: game.name.clone(),
                        hyperparam: None,
                        metric,
                    },
                    CellStats {
                        mean,
                        std_err: 0.0,
                        count: 0,
                    },
                );
            }
        }
    }

    let games = game_idx
        .iter()
        .map(|&g| (dataset.games[g].name.clone(), dataset.games[g].actions.clone()))
        .collect();
    Ok((ResultTable { games, cells }, stats))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub best_hyperparam: Option<usize>,
    pub best_row: BTreeMap<String, f64>,
    pub median_hyperparam: Option<usize>,
    pub median_row: BTreeMap<String, f64>,
}

/// Best and (lower) median hyper-parameter by the selection metric. Ties in
/// the best value go to the smaller hyper-parameter.
pub fn select_best_median(
    table: &ResultTable,
    classifier: &str,
    feature_set: &str,
    game: &str,
    metric: SummaryMeasure,
) -> Option<Selection> {
    let metric = metric.to_string();
    let mut scored: Vec<(Option<usize>, f64)> = table
        .hyperparams(classifier, feature_set, game)
        .into_iter()
        .filter_map(|h| table.mean(classifier, feature_set, game, h, &metric).map(|v| (h, v)))
        .collect();
    if scored.is_empty() {
        return None;
    }
    let best = scored
        .iter()
        .copied()
        .fold(None::<(Option<usize>, f64)>, |acc, cur| match acc {
            Some(a) if a.1 >= cur.1 => Some(a),
            _ => Some(cur),
        })
        .expect("nonempty");
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let median = scored[(scored.len() - 1) / 2];
    Some(Selection {
        best_hyperparam: best.0,
        best_row: table.row(classifier, feature_set, game, best.0),
        median_hyperparam: median.0,
        median_row: table.row(classifier, feature_set, game, median.0),
    })
}

fn hp(h: Option<usize>) -> String {
    h.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `results.csv`, `table2.csv`, `table3_best.csv`,
/// `table3_median.csv` and one `curves_<game>.csv` per game. Returns the
/// written paths in a fixed order.
pub fn emit_reports(
    table: &ResultTable,
    out_dir: &Path,
    selection_metric: SummaryMeasure,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();
    let open = |name: &str| -> Result<(PathBuf, csv::Writer<std::fs::File>), HarnessError> {
        let path = out_dir.join(name);
        let file = std::fs::File::create(&path).map_err(io_err(&path))?;
        Ok((path, csv::Writer::from_writer(file)))
    };

    let path = out_dir.join("results.csv");
    table.write_csv(std::fs::File::create(&path).map_err(io_err(&path))?)?;
    written.push(path);

    let models = table.models();
    let summary = [SummaryMeasure::Accuracy, SummaryMeasure::MavF1, SummaryMeasure::MwavF1];

    // per-class F1 at the best configuration
    let (path, mut w) = open("table2.csv")?;
    let mut header = vec!["classifier".to_string(), "feature_set".to_string()];
    for (g, actions) in &table.games {
        header.push(format!("{g}.hyperparam"));
        header.extend(actions.iter().map(|a| format!("{g}.f1:{a}")));
    }
    w.write_record(&header)?;
    for (c, f) in &models {
        let mut rec = vec![c.clone(), f.clone()];
        for (g, actions) in &table.games {
            let sel = select_best_median(table, c, f, g, selection_metric);
            rec.push(sel.as_ref().map(|s| hp(s.best_hyperparam)).unwrap_or_default());
            for a in actions {
                rec.push(
                    sel.as_ref()
                        .and_then(|s| s.best_row.get(&format!("f1:{a}")))
                        .map(|&v| fmt_score(v))
                        .unwrap_or_default(),
                );
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(&path))?;
    written.push(path);

    for (name, best) in [("table3_best.csv", true), ("table3_median.csv", false)] {
        let (path, mut w) = open(name)?;
        let mut header = vec!["classifier".to_string(), "feature_set".to_string()];
        for (g, _) in &table.games {
            header.push(format!("{g}.hyperparam"));
            header.extend(summary.iter().map(|m| format!("{g}.{m}")));
        }
        w.write_record(&header)?;
        for (c, f) in &models {
            let mut rec = vec![c.clone(), f.clone()];
            for (g, _) in &table.games {
                let sel = select_best_median(table, c, f, g, selection_metric);
                let (h, row) = match &sel {
                    Some(s) if best => (s.best_hyperparam, Some(&s.best_row)),
                    Some(s) => (s.median_hyperparam, Some(&s.median_row)),
                    None => (None, None),
                };
                rec.push(hp(h));
                for m in &summary {
                    rec.push(
                        row.and_then(|r| r.get(&m.to_string()))
                            .map(|&v| fmt_score(v))
                            .unwrap_or_default(),
                    );
                }
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(io_err(&path))?;
        written.push(path);
    }

    for (g, _) in &table.games {
        let (path, mut w) = open(&format!("curves_{g}.csv"))?;
        w.write_record(["classifier", "feature_set", "metric", "k", "value"])?;
        for (c, f) in models.iter().filter(|(c, _)| c == ClassifierKind::Tac.name()) {
            for m in &summary {
                for h in table.hyperparams(c, f, g).into_iter().flatten() {
                    if let Some(v) = table.mean(c, f, g, Some(h), &m.to_string()) {
                        w.write_record([c.clone(), f.clone(), m.to_string(), h.to_string(), fmt_score(v)])?;
                    }
                }
            }
        }
        w.flush().map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

pub fn sha256_file(path: &Path) -> Result<String, HarnessError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub engine_version: String,
    pub schema_version: u32,
    pub git_describe: String,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub dendrograms: BTreeMap<String, String>,
    /// File name to SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

pub fn write_manifest(
    out_dir: &Path,
    config: &ExperimentConfig,
    stats: &RunStats,
    files: &[PathBuf],
) -> Result<PathBuf, HarnessError> {
    let manifest = RunManifest {
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        schema_version: crate::SCHEMA_VERSION,
        git_describe: git_describe(),
        master_seed: config.master_seed,
        config: config.clone(),
        dendrograms: stats.dendrograms.clone(),
        files: files
            .iter()
            .map(|p| {
                let name = p.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default();
                sha256_file(p).map(|h| (name, h))
            })
            .collect::<Result<_, _>>()?,
    };
    let path = out_dir.join("run_manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(io_err(&path))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(values: &[(usize, f64)]) -> ResultTable {
        let mut cells = BTreeMap::new();
        for &(k, v) in values {
            for (metric, value) in [("mav-f1", v), ("accuracy", 100.0 - v)] {
                cells.insert(
                    CellKey {
                        classifier: "TAC".into(),
                        feature_set: OURS.into(),
                        game: "chicken".into(),
                        hyperparam: Some(k),
                        metric: metric.into(),
                    },
                    CellStats { mean: value, std_err: 0.0, count: 1 },
                );
            }
        }
        ResultTable {
            games: vec![("chicken".into(), vec!["Speed".into(), "Stop".into()])],
            cells,
        }
    }

    #[test]
    fn best_and_median() {
        let t = table(&[(2, 40.0), (3, 50.0), (4, 60.0)]);
        let s = select_best_median(&t, "TAC", OURS, "chicken", SummaryMeasure::MavF1).unwrap();
        assert_eq!(s.best_hyperparam, Some(4));
        assert_eq!(s.median_hyperparam, Some(3));
        assert_eq!(s.best_row["accuracy"], 40.0);
    }

    #[test]
    fn single_value_and_ties() {
        let t = table(&[(7, 10.0)]);
        let s = select_best_median(&t, "TAC", OURS, "chicken", SummaryMeasure::MavF1).unwrap();
        assert_eq!((s.best_hyperparam, s.median_hyperparam), (Some(7), Some(7)));
        // ties go to the smaller k; lower median of four values
        let t = table(&[(2, 50.0), (3, 50.0), (4, 10.0), (5, 20.0)]);
        let s = select_best_median(&t, "TAC", OURS, "chicken", SummaryMeasure::MavF1).unwrap();
        assert_eq!(s.best_hyperparam, Some(2));
        assert_eq!(s.median_hyperparam, Some(5));
        assert!(select_best_median(&t, "MVC", OURS, "chicken", SummaryMeasure::MavF1).is_none());
    }

    #[test]
    fn test_size_rounding() {
        let c = ExperimentConfig::default();
        assert_eq!(c.test_size(271), 27);
        assert_eq!(c.test_size(10), 1);
        assert_eq!(c.test_size(15), 2);
        let half = ExperimentConfig { train_fraction: 0.5, ..Default::default() };
        assert_eq!(half.test_size(5), 3);
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"master_seed": 7, "K_range": {"start": 1, "end": 3}}"#).unwrap();
        assert_eq!(c.repetitions, 5000);
        assert_eq!(c.k_range, IntRange::new(2, 30));
        assert_eq!(c.knn_range, IntRange::new(1, 3));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
        let bad = ExperimentConfig { train_fraction: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn results_csv_round_trip() {
        let t = table(&[(2, 40.0), (3, 50.5)]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = ResultTable::read_csv(&buf[..], t.games.clone()).unwrap();
        assert_eq!(back, t);
    }
}
