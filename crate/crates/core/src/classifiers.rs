//! Transductive attribute clustering (TAC) and the comparison classifiers:
//! majority vote, K nearest neighbors and the expected scores of the two
//! random guessers.

use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::ClusterAssignment;
use crate::features::FeatureMatrix;
use crate::metrics::{self, ClassScores, ConfusionMatrix, Measure};

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("K = {k} is outside 1..={max}")]
    BadK { k: usize, max: usize },
    #[error("invalid split: {0}")]
    BadSplit(String),
    #[error("class proportions sum to {0}, not 1")]
    BadProportions(f64),
    #[error("unknown measure: {0}")]
    UnknownMeasure(String),
    #[error("unknown option `{0}`")]
    UnknownOption(String),
}

/// Disjoint train/test partition of participant indices `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    train: Vec<usize>,
    test: Vec<usize>,
    is_train: Vec<bool>,
}

impl Split {
    pub fn from_test(n: usize, mut test: Vec<usize>) -> Result<Split, ClassifierError> {
        test.sort_unstable();
        test.dedup();
        if test.is_empty() || test.len() >= n || test.last().is_some_and(|&t| t >= n) {
            return Err(ClassifierError::BadSplit(format!(
                "{} test indices for {n} participants",
                test.len()
            )));
        }
        let mut is_train = vec![true; n];
        for &t in &test {
            is_train[t] = false;
        }
        let train = (0..n).filter(|&i| is_train[i]).collect();
        Ok(Split { train, test, is_train })
    }

    /// Uniformly random split with exactly `test_size` test participants.
    pub fn sample<R: Rng + ?Sized>(n: usize, test_size: usize, rng: &mut R) -> Result<Split, ClassifierError> {
        if test_size == 0 || test_size >= n {
            return Err(ClassifierError::BadSplit(format!(
                "test size {test_size} for {n} participants"
            )));
        }
        Split::from_test(n, index::sample(rng, n, test_size).into_vec())
    }

    pub fn n(&self) -> usize {
        self.is_train.len()
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    /// Test indices in ascending order.
    pub fn test(&self) -> &[usize] {
        &self.test
    }

    pub fn is_train(&self, i: usize) -> bool {
        self.is_train[i]
    }
}

/// A split together with one game's labels. Labels exist for every
/// participant; classifiers read only those of train participants.
#[derive(Clone, Copy, Debug)]
pub struct LabeledSplit<'a> {
    pub split: &'a Split,
    pub labels: &'a [usize],
    pub num_actions: usize,
}

impl<'a> LabeledSplit<'a> {
    pub fn new(split: &'a Split, labels: &'a [usize], num_actions: usize) -> Self {
        debug_assert_eq!(split.n(), labels.len());
        LabeledSplit {
            split,
            labels,
            num_actions,
        }
    }

    /// True labels of the test participants, in test order.
    pub fn test_labels(&self) -> Vec<usize> {
        self.split.test().iter().map(|&i| self.labels[i]).collect()
    }

    pub fn confusion(&self, predicted: &[usize]) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::zeros(self.num_actions);
        for (&i, &p) in self.split.test().iter().zip(predicted) {
            cm.add(self.labels[i], p);
        }
        cm
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub classifier: String,
    pub hyperparam: Option<usize>,
    pub seed: u64,
    /// Test participant indices, ascending.
    pub test: Vec<usize>,
    /// Predicted action index per test participant.
    pub predicted: Vec<usize>,
}

/// Which labels a tied or unlabeled cluster draws its random prediction from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// Uniform over the game's whole action set.
    #[default]
    AllActions,
    /// Uniform over the labels sharing the top count (all actions when the
    /// cluster has no labeled members).
    TiedLabels,
}

/// Whether each unlabeled member of a tied cluster gets its own draw.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieDraw {
    #[default]
    PerMember,
    PerCluster,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TacOptions {
    #[serde(default)]
    pub tie_rule: TieRule,
    #[serde(default)]
    pub tie_draw: TieDraw,
}

/// Outcome of a label vote.
enum Vote<'a> {
    Winner(usize),
    Random(&'a [usize]),
}

/// Strict-majority vote over `counts`. `tied` is scratch space.
fn vote<'a>(counts: &[u32], rule: TieRule, tied: &'a mut Vec<usize>) -> Vote<'a> {
    let top = counts.iter().copied().max().unwrap_or(0);
    tied.clear();
    if top == 0 {
        tied.extend(0..counts.len());
        return Vote::Random(tied);
    }
    tied.extend(counts.iter().enumerate().filter(|(_, &c)| c == top).map(|(i, _)| i));
    if tied.len() == 1 {
        return Vote::Winner(tied[0]);
    }
    if rule == TieRule::AllActions {
        tied.clear();
        tied.extend(0..counts.len());
    }
    Vote::Random(tied)
}

/// Reusable buffers for repeated TAC predictions.
#[derive(Default)]
pub struct TacScratch {
    counts: Vec<u32>,
    tied: Vec<usize>,
    cluster_draw: Vec<Option<usize>>,
}

/// Predicts each test participant's action by majority vote over the train
/// members of its cluster. Writes predictions in test order into `out`.
pub fn tac_predict_into<R: Rng + ?Sized>(
    assignment: &ClusterAssignment,
    ls: &LabeledSplit<'_>,
    opts: TacOptions,
    rng: &mut R,
    scratch: &mut TacScratch,
    out: &mut Vec<usize>,
) {
    let a = ls.num_actions;
    let k = assignment.k();
    scratch.counts.clear();
    scratch.counts.resize(k * a, 0);
    for &i in ls.split.train() {
        scratch.counts[assignment.label_of(i) * a + ls.labels[i]] += 1;
    }
    scratch.cluster_draw.clear();
    scratch.cluster_draw.resize(k, None);
    out.clear();
    for &t in ls.split.test() {
        let c = assignment.label_of(t);
        let pred = match vote(&scratch.counts[c * a..(c + 1) * a], opts.tie_rule, &mut scratch.tied) {
            Vote::Winner(l) => l,
            Vote::Random(options) => match opts.tie_draw {
                TieDraw::PerMember => options[rng.gen_range(0..options.len())],
                TieDraw::PerCluster => *scratch.cluster_draw[c]
                    .get_or_insert_with(|| options[rng.gen_range(0..options.len())]),
            },
        };
        out.push(pred);
    }
}

pub fn tac_predict<R: Rng + ?Sized>(
    assignment: &ClusterAssignment,
    ls: &LabeledSplit<'_>,
    opts: TacOptions,
    rng: &mut R,
) -> Vec<usize> {
    let mut out = Vec::with_capacity(ls.split.test().len());
    tac_predict_into(assignment, ls, opts, rng, &mut TacScratch::default(), &mut out);
    out
}

/// For each participant, every other participant ordered by increasing
/// Euclidean distance, ties by participant index.
#[derive(Clone, Debug)]
pub struct KnnIndex {
    order: Vec<Vec<u32>>,
}

impl KnnIndex {
    pub fn new(features: &FeatureMatrix) -> KnnIndex {
        let dist = crate::clustering::pairwise_sq_dist(features);
        let n = features.n();
        let order = (0..n)
            .map(|i| {
                let mut others: Vec<u32> = (0..n as u32).filter(|&j| j as usize != i).collect();
                others.sort_by(|&x, &y| {
                    dist.get(i, x as usize)
                        .partial_cmp(&dist.get(i, y as usize))
                        .expect("finite distances")
                        .then(x.cmp(&y))
                });
                others
            })
            .collect();
        KnnIndex { order }
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    /// Majority vote over the `k` nearest train participants; label ties
    /// are broken uniformly at random among the tied labels.
    pub fn predict_into<R: Rng + ?Sized>(
        &self,
        ls: &LabeledSplit<'_>,
        k: usize,
        rng: &mut R,
        out: &mut Vec<usize>,
    ) -> Result<(), ClassifierError> {
        let max = ls.split.train().len();
        if k == 0 || k > max {
            return Err(ClassifierError::BadK { k, max });
        }
        let mut counts = vec![0u32; ls.num_actions];
        let mut tied = Vec::with_capacity(ls.num_actions);
        out.clear();
        for &t in ls.split.test() {
            counts.iter_mut().for_each(|c| *c = 0);
            let neighbors = self.order[t]
                .iter()
                .map(|&j| j as usize)
                .filter(|&j| ls.split.is_train(j))
                .take(k);
            for j in neighbors {
                counts[ls.labels[j]] += 1;
            }
            let pred = match vote(&counts, TieRule::TiedLabels, &mut tied) {
                Vote::Winner(l) => l,
                Vote::Random(options) => options[rng.gen_range(0..options.len())],
            };
            out.push(pred);
        }
        Ok(())
    }
}

pub fn knn_predict<R: Rng + ?Sized>(
    features: &FeatureMatrix,
    ls: &LabeledSplit<'_>,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>, ClassifierError> {
    let mut out = Vec::new();
    KnnIndex::new(features).predict_into(ls, k, rng, &mut out)?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MvcScope {
    /// Majority over every participant, test labels included.
    #[default]
    WholeData,
    TrainOnly,
}

impl FromStr for MvcScope {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whole" | "whole-data" | "whole_data" => Ok(MvcScope::WholeData),
            "train" | "train-only" | "train_only" => Ok(MvcScope::TrainOnly),
            _ => Err(ClassifierError::UnknownOption(s.to_string())),
        }
    }
}

/// Most frequent label; ties go to the earliest action in canonical order.
pub fn majority_label(labels: impl IntoIterator<Item = usize>, num_actions: usize) -> usize {
    let mut counts = vec![0usize; num_actions];
    for l in labels {
        counts[l] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0);
    counts.iter().position(|&c| c == top).unwrap_or(0)
}

pub fn mvc_label(ls: &LabeledSplit<'_>, scope: MvcScope) -> usize {
    match scope {
        MvcScope::WholeData => majority_label(ls.labels.iter().copied(), ls.num_actions),
        MvcScope::TrainOnly => majority_label(
            ls.split.train().iter().map(|&i| ls.labels[i]),
            ls.num_actions,
        ),
    }
}

pub fn mvc_predict(ls: &LabeledSplit<'_>, scope: MvcScope) -> Vec<usize> {
    vec![mvc_label(ls, scope); ls.split.test().len()]
}

/// The two stochastic reference classifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RandomGuesser {
    /// Uniform over the actions.
    Erg,
    /// Draws each action with its empirical frequency.
    Ewg,
}

impl RandomGuesser {
    pub fn name(self) -> &'static str {
        match self {
            RandomGuesser::Erg => "ERG",
            RandomGuesser::Ewg => "EWG",
        }
    }

    pub fn predictor_probs(self, class_props: &[f64]) -> Vec<f64> {
        match self {
            RandomGuesser::Erg => vec![1.0 / class_props.len() as f64; class_props.len()],
            RandomGuesser::Ewg => class_props.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Expectation {
    /// Ratio-of-expectations closed form.
    PlugIn,
    /// Average of the actual measure over simulated i.i.d. test sets.
    MonteCarlo { trials: usize, test_size: usize, seed: u64 },
}

/// Expected per-class scores and aggregates of a random guesser.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedScores {
    pub per_class: Vec<ClassScores>,
    pub accuracy: f64,
    pub mav_f1: f64,
    pub mwav_f1: f64,
}

impl ExpectedScores {
    pub fn get(&self, measure: Measure) -> Result<f64, ClassifierError> {
        let class = |i: usize| {
            self.per_class
                .get(i)
                .ok_or_else(|| ClassifierError::UnknownMeasure(format!("{measure:?}")))
        };
        Ok(match measure {
            Measure::Accuracy => self.accuracy,
            Measure::MavF1 => self.mav_f1,
            Measure::MwavF1 => self.mwav_f1,
            Measure::F1(i) => class(i)?.f1,
            Measure::Precision(i) => class(i)?.precision,
            Measure::Recall(i) => class(i)?.recall,
        })
    }
}

fn check_props(class_props: &[f64]) -> Result<(), ClassifierError> {
    let sum: f64 = class_props.iter().sum();
    if class_props.is_empty() || (sum - 1.0).abs() > 1e-9 || class_props.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(ClassifierError::BadProportions(sum));
    }
    Ok(())
}

pub fn expected_random_table(
    class_props: &[f64],
    guesser: RandomGuesser,
    method: Expectation,
) -> Result<ExpectedScores, ClassifierError> {
    check_props(class_props)?;
    let q = guesser.predictor_probs(class_props);
    let p = class_props;
    match method {
        Expectation::PlugIn => {
            let per_class: Vec<ClassScores> = p
                .iter()
                .zip(&q)
                .map(|(&pi, &qi)| {
                    let (precision, recall) = (100.0 * pi, 100.0 * qi);
                    ClassScores {
                        precision,
                        recall,
                        f1: metrics::f1_from(precision, recall),
                    }
                })
                .collect();
            let accuracy = 100.0 * p.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
            let mav_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / p.len() as f64;
            let mwav_f1 = per_class.iter().zip(p).map(|(c, &pi)| pi * c.f1).sum();
            Ok(ExpectedScores {
                per_class,
                accuracy,
                mav_f1,
                mwav_f1,
            })
        }
        Expectation::MonteCarlo {
            trials,
            test_size,
            seed,
        } => {
            if trials == 0 || test_size == 0 {
                return Err(ClassifierError::BadSplit("empty simulation".into()));
            }
            let truth = WeightedIndex::new(p).map_err(|_| ClassifierError::BadProportions(p.iter().sum()))?;
            let guess = WeightedIndex::new(&q).map_err(|_| ClassifierError::BadProportions(1.0))?;
            let mut rng = crate::rng::stream(seed, &[crate::rng::tag(guesser.name())]);
            let m = p.len();
            let mut sum_class = vec![(0.0, 0.0, 0.0); m];
            let (mut acc, mut mav, mut mwav) = (0.0, 0.0, 0.0);
            for _ in 0..trials {
                let mut cm = ConfusionMatrix::zeros(m);
                for _ in 0..test_size {
                    cm.add(truth.sample(&mut rng), guess.sample(&mut rng));
                }
                let classes = metrics::per_class_prf(&cm);
                let agg = metrics::aggregate_with(&cm, &classes);
                for (s, c) in sum_class.iter_mut().zip(&classes) {
                    s.0 += c.precision;
                    s.1 += c.recall;
                    s.2 += c.f1;
                }
                acc += agg.accuracy;
                mav += agg.mav_f1;
                mwav += agg.mwav_f1;
            }
            let t = trials as f64;
            Ok(ExpectedScores {
                per_class: sum_class
                    .into_iter()
                    .map(|(pr, re, f1)| ClassScores {
                        precision: pr / t,
                        recall: re / t,
                        f1: f1 / t,
                    })
                    .collect(),
                accuracy: acc / t,
                mav_f1: mav / t,
                mwav_f1: mwav / t,
            })
        }
    }
}

/// Expected value of one measure for a random guesser.
pub fn expected_random_scores(
    class_props: &[f64],
    guesser: RandomGuesser,
    measure: Measure,
    method: Expectation,
) -> Result<f64, ClassifierError> {
    let in_range = match measure {
        Measure::F1(i) | Measure::Precision(i) | Measure::Recall(i) => i < class_props.len(),
        _ => true,
    };
    if !in_range {
        return Err(ClassifierError::UnknownMeasure(format!(
            "{measure:?} for {} classes",
            class_props.len()
        )));
    }
    expected_random_table(class_props, guesser, method)?.get(measure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::ClusterAssignment;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn split_validity() {
        let s = Split::from_test(5, vec![3, 1]).unwrap();
        assert_eq!(s.train(), &[0, 2, 4]);
        assert_eq!(s.test(), &[1, 3]);
        assert!(Split::from_test(3, vec![]).is_err());
        assert!(Split::from_test(2, vec![0, 1]).is_err());
        assert!(Split::from_test(2, vec![5]).is_err());
        let s = Split::sample(271, 27, &mut rng()).unwrap();
        assert_eq!(s.test().len(), 27);
        assert_eq!(s.train().len(), 244);
    }

    #[test]
    fn tac_strict_majority() {
        // one cluster: train Speed x3, Stop x1; test participant 4
        let assignment = ClusterAssignment::from_keys(&[0; 5]);
        let split = Split::from_test(5, vec![4]).unwrap();
        let labels = [0, 0, 1, 0, 1];
        let ls = LabeledSplit::new(&split, &labels, 2);
        assert_eq!(tac_predict(&assignment, &ls, TacOptions::default(), &mut rng()), vec![0]);
    }

    #[test]
    fn tac_tie_is_random_over_actions() {
        // Left x2, Right x2 among train, two test members
        let assignment = ClusterAssignment::from_keys(&[0; 6]);
        let split = Split::from_test(6, vec![4, 5]).unwrap();
        let labels = [0, 0, 1, 1, 0, 0];
        let ls = LabeledSplit::new(&split, &labels, 2);
        let mut seen = [0; 2];
        for s in 0..200 {
            for p in tac_predict(&assignment, &ls, TacOptions::default(), &mut ChaCha8Rng::seed_from_u64(s)) {
                seen[p] += 1;
            }
        }
        assert!(seen[0] > 150 && seen[1] > 150, "{seen:?}");
    }

    #[test]
    fn tac_tied_labels_rule_excludes_untied_actions() {
        // door: A x1, B x1, C x0 -> only A or B under the tied-labels rule
        let assignment = ClusterAssignment::from_keys(&[0; 4]);
        let split = Split::from_test(4, vec![2, 3]).unwrap();
        let labels = [0, 1, 2, 2];
        let ls = LabeledSplit::new(&split, &labels, 3);
        let opts = TacOptions {
            tie_rule: TieRule::TiedLabels,
            tie_draw: TieDraw::PerMember,
        };
        for s in 0..100 {
            let p = tac_predict(&assignment, &ls, opts, &mut ChaCha8Rng::seed_from_u64(s));
            assert!(p.iter().all(|&l| l < 2));
        }
    }

    #[test]
    fn tac_per_cluster_draw_shared() {
        let assignment = ClusterAssignment::from_keys(&[0, 0, 0, 0, 0, 0]);
        let split = Split::from_test(6, vec![1, 2, 3, 4, 5]).unwrap();
        let labels = [0; 6];
        // single train member means no tie; use a labelless cluster instead
        let assignment2 = ClusterAssignment::from_keys(&[0, 1, 1, 1, 1, 1]);
        let ls = LabeledSplit::new(&split, &labels, 3);
        let opts = TacOptions {
            tie_rule: TieRule::AllActions,
            tie_draw: TieDraw::PerCluster,
        };
        assert_eq!(tac_predict(&assignment, &ls, opts, &mut rng()), vec![0; 5]);
        for s in 0..50 {
            let p = tac_predict(&assignment2, &ls, opts, &mut ChaCha8Rng::seed_from_u64(s));
            assert!(p.iter().all(|&l| l == p[0]));
        }
    }

    #[test]
    fn tac_six_points_brute_force() {
        // clusters {0,1,2} and {3,4,5}; test = {2, 5}
        let assignment = ClusterAssignment::from_keys(&[0, 0, 0, 1, 1, 1]);
        let split = Split::from_test(6, vec![2, 5]).unwrap();
        let labels = [1, 1, 0, 0, 0, 1];
        let ls = LabeledSplit::new(&split, &labels, 2);
        // brute force: cluster 0 train labels {1,1} -> 1; cluster 1 {0,0} -> 0
        assert_eq!(tac_predict(&assignment, &ls, TacOptions::default(), &mut rng()), vec![1, 0]);
    }

    fn line(xs: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(
            (0..xs.len()).map(|i| format!("p{i}")).collect(),
            vec!["x".into()],
            xs.to_vec(),
            crate::features::Provenance::Tfidf,
        )
        .unwrap()
    }

    #[test]
    fn knn_examples() {
        let f = line(&[0.0, 5.0, 0.0, 1.0, 1.1, 9.0]);
        let labels = [1, 0, 0, 0, 1, 1];
        // test participant 2 coincides with train participant 0
        let split = Split::from_test(6, vec![2]).unwrap();
        let ls = LabeledSplit::new(&split, &labels, 2);
        assert_eq!(knn_predict(&f, &ls, 1, &mut rng()).unwrap(), vec![1]);
        // K = 3 neighbors of x=0: 0 (1), 3 (0), 4 (1) -> 1
        assert_eq!(knn_predict(&f, &ls, 3, &mut rng()).unwrap(), vec![1]);
        assert_eq!(
            knn_predict(&f, &ls, 6, &mut rng()).unwrap_err(),
            ClassifierError::BadK { k: 6, max: 5 }
        );
        assert!(knn_predict(&f, &ls, 0, &mut rng()).is_err());
    }

    #[test]
    fn knn_distance_ties_by_index() {
        // participants 1 and 2 are equidistant from 0; index 1 wins for K=1
        let f = line(&[0.0, -1.0, 1.0]);
        let labels = [0, 1, 0];
        let split = Split::from_test(3, vec![0]).unwrap();
        let ls = LabeledSplit::new(&split, &labels, 2);
        assert_eq!(knn_predict(&f, &ls, 1, &mut rng()).unwrap(), vec![1]);
    }

    #[test]
    fn mvc_scopes_and_ties() {
        let split = Split::from_test(6, vec![0, 1, 2]).unwrap();
        // whole data: 0 x3, 1 x3 -> tie -> action 0; train only {3,4,5}: 1 x3
        let labels = [0, 0, 0, 1, 1, 1];
        let ls = LabeledSplit::new(&split, &labels, 2);
        assert_eq!(mvc_predict(&ls, MvcScope::WholeData), vec![0; 3]);
        assert_eq!(mvc_predict(&ls, MvcScope::TrainOnly), vec![1; 3]);
        assert_eq!("train".parse::<MvcScope>().unwrap(), MvcScope::TrainOnly);
    }

    #[test]
    fn plug_in_matches_reference_rows() {
        let chicken = [156.0 / 271.0, 115.0 / 271.0];
        let erg = expected_random_table(&chicken, RandomGuesser::Erg, Expectation::PlugIn).unwrap();
        assert_eq!(erg.accuracy, 50.0);
        let p = 156.0 / 271.0;
        assert!((erg.per_class[0].f1 - 100.0 * 2.0 * 0.5 * p / (0.5 + p)).abs() < 1e-12);
        assert!((erg.per_class[0].f1 - 53.51).abs() < 0.01);
        let ewg = expected_random_table(&[0.69, 0.31], RandomGuesser::Ewg, Expectation::PlugIn).unwrap();
        assert!((ewg.per_class[0].f1 - 69.0).abs() < 1e-9);
        // ERG accuracy is 1/|Y| whatever the class balance
        let skew = expected_random_table(&[0.9, 0.1], RandomGuesser::Erg, Expectation::PlugIn).unwrap();
        assert!((skew.accuracy - 50.0).abs() < 1e-12);
    }

    #[test]
    fn expected_score_errors() {
        assert!(matches!(
            expected_random_scores(&[0.5, 0.4], RandomGuesser::Erg, Measure::Accuracy, Expectation::PlugIn),
            Err(ClassifierError::BadProportions(_))
        ));
        assert!(matches!(
            expected_random_scores(&[0.5, 0.5], RandomGuesser::Erg, Measure::F1(2), Expectation::PlugIn),
            Err(ClassifierError::UnknownMeasure(_))
        ));
    }

    #[test]
    fn monte_carlo_accuracy_and_recall_converge() {
        let props = [156.0 / 271.0, 115.0 / 271.0];
        for guesser in [RandomGuesser::Erg, RandomGuesser::Ewg] {
            let plug = expected_random_table(&props, guesser, Expectation::PlugIn).unwrap();
            // 10^6 simulated test examples
            let mc = expected_random_table(
                &props,
                guesser,
                Expectation::MonteCarlo { trials: 20_000, test_size: 50, seed: 5 },
            )
            .unwrap();
            assert!((mc.accuracy - plug.accuracy).abs() < 0.5);
            for c in 0..2 {
                assert!((mc.per_class[c].recall - plug.per_class[c].recall).abs() < 0.5);
            }
        }
    }
}
