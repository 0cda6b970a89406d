//! Confusion-matrix based evaluation measures on a 0–100 scale.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("{actual} actual labels but {predicted} predictions")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("label {label} is outside the {num_labels}-action alphabet")]
    IllegalLabel { label: usize, num_labels: usize },
    #[error("unknown measure `{0}`")]
    UnknownMeasure(String),
}

/// `counts[true * L + pred]` over an `L`-action alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_labels: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(num_labels: usize) -> Self {
        ConfusionMatrix {
            num_labels,
            counts: vec![0; num_labels * num_labels],
        }
    }

    #[inline]
    pub fn add(&mut self, actual: usize, predicted: usize) {
        self.counts[actual * self.num_labels + predicted] += 1;
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.num_labels + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn true_count(&self, class: usize) -> u64 {
        (0..self.num_labels).map(|p| self.get(class, p)).sum()
    }

    pub fn predicted_count(&self, class: usize) -> u64 {
        (0..self.num_labels).map(|t| self.get(t, class)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_labels).map(|i| self.get(i, i)).sum()
    }
}

pub fn confusion(
    actual: &[usize],
    predicted: &[usize],
    num_labels: usize,
) -> Result<ConfusionMatrix, MetricError> {
    if actual.len() != predicted.len() {
        return Err(MetricError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(num_labels);
    for (&a, &p) in actual.iter().zip(predicted) {
        for label in [a, p] {
            if label >= num_labels {
                return Err(MetricError::IllegalLabel { label, num_labels });
            }
        }
        cm.add(a, p);
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Harmonic mean with the `P + R = 0 => 0` convention.
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Precision, recall and F1 per class. Empty denominators yield 0.
pub fn per_class_prf(cm: &ConfusionMatrix) -> Vec<ClassScores> {
    (0..cm.num_labels())
        .map(|i| {
            let tp = cm.get(i, i);
            let precision = ratio(tp, cm.predicted_count(i));
            let recall = ratio(tp, cm.true_count(i));
            ClassScores {
                precision,
                recall,
                f1: f1_from(precision, recall),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mav_f1: f64,
    pub mwav_f1: f64,
    pub accuracy: f64,
}

/// MAV-F1 averages over every action of the game, present in the test set
/// or not; MWAV-F1 weights each class by its true count.
pub fn aggregate(cm: &ConfusionMatrix) -> Aggregate {
    aggregate_with(cm, &per_class_prf(cm))
}

pub fn aggregate_with(cm: &ConfusionMatrix, classes: &[ClassScores]) -> Aggregate {
    let total = cm.total();
    let labels = cm.num_labels();
    let mav_f1 = classes.iter().map(|c| c.f1).sum::<f64>() / labels as f64;
    let mwav_f1 = if total == 0 {
        0.0
    } else {
        classes
            .iter()
            .enumerate()
            .map(|(i, c)| cm.true_count(i) as f64 / total as f64 * c.f1)
            .sum()
    };
    Aggregate {
        mav_f1,
        mwav_f1,
        accuracy: ratio(cm.trace(), total),
    }
}

/// A named evaluation measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Measure {
    Accuracy,
    MavF1,
    MwavF1,
    F1(usize),
    Precision(usize),
    Recall(usize),
}

impl Measure {
    pub fn evaluate(self, cm: &ConfusionMatrix) -> f64 {
        let classes = per_class_prf(cm);
        match self {
            Measure::Accuracy => aggregate_with(cm, &classes).accuracy,
            Measure::MavF1 => aggregate_with(cm, &classes).mav_f1,
            Measure::MwavF1 => aggregate_with(cm, &classes).mwav_f1,
            Measure::F1(i) => classes[i].f1,
            Measure::Precision(i) => classes[i].precision,
            Measure::Recall(i) => classes[i].recall,
        }
    }

    /// Parses `accuracy`, `mav-f1`, `mwav-f1`, `f1:<i>`, `precision:<i>` or
    /// `recall:<i>` where `<i>` is an action index or label in `actions`.
    pub fn parse(s: &str, actions: &[String]) -> Result<Measure, MetricError> {
        let unknown = || MetricError::UnknownMeasure(s.to_string());
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "accuracy" | "acc" => return Ok(Measure::Accuracy),
            "mav-f1" | "mav_f1" => return Ok(Measure::MavF1),
            "mwav-f1" | "mwav_f1" => return Ok(Measure::MwavF1),
            _ => {}
        }
        let (kind, class) = s.split_once(':').ok_or_else(unknown)?;
        let idx = actions
            .iter()
            .position(|a| a == class)
            .or_else(|| class.parse::<usize>().ok().filter(|&i| i < actions.len()))
            .ok_or_else(unknown)?;
        match kind.to_ascii_lowercase().as_str() {
            "f1" => Ok(Measure::F1(idx)),
            "precision" => Ok(Measure::Precision(idx)),
            "recall" => Ok(Measure::Recall(idx)),
            _ => Err(unknown()),
        }
    }

    pub fn name(self, actions: &[String]) -> String {
        match self {
            Measure::Accuracy => "accuracy".into(),
            Measure::MavF1 => "mav-f1".into(),
            Measure::MwavF1 => "mwav-f1".into(),
            Measure::F1(i) => format!("f1:{}", actions[i]),
            Measure::Precision(i) => format!("precision:{}", actions[i]),
            Measure::Recall(i) => format!("recall:{}", actions[i]),
        }
    }
}

/// Game-independent summary measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummaryMeasure {
    Accuracy,
    MavF1,
    MwavF1,
}

impl SummaryMeasure {
    pub fn as_measure(self) -> Measure {
        match self {
            SummaryMeasure::Accuracy => Measure::Accuracy,
            SummaryMeasure::MavF1 => Measure::MavF1,
            SummaryMeasure::MwavF1 => Measure::MwavF1,
        }
    }
}

impl fmt::Display for SummaryMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SummaryMeasure::Accuracy => "accuracy",
            SummaryMeasure::MavF1 => "mav-f1",
            SummaryMeasure::MwavF1 => "mwav-f1",
        })
    }
}

impl FromStr for SummaryMeasure {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match Measure::parse(s, &[])? {
            Measure::Accuracy => Ok(SummaryMeasure::Accuracy),
            Measure::MavF1 => Ok(SummaryMeasure::MavF1),
            Measure::MwavF1 => Ok(SummaryMeasure::MwavF1),
            _ => Err(MetricError::UnknownMeasure(s.to_string())),
        }
    }
}
