//! Confusion counts and the precision / recall / accuracy / F1 report, at
//! image level or pixel level.

use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::components::remove_small_components;
use crate::raster::BinaryMask;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("mask dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("{0} is undefined (zero denominator)")]
    UndefinedMetric(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 1 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Negative => "negative",
            Label::Positive => "positive",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" | "1" | "crack" => Ok(Label::Positive),
            "negative" | "neg" | "0" | "plain" => Ok(Label::Negative),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Counts form a commutative monoid under `+`, so shards can be merged in
/// any order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, pred: Label, truth: Label) {
        match (pred, truth) {
            (Label::Positive, Label::Positive) => self.tp += 1,
            (Label::Positive, Label::Negative) => self.fp += 1,
            (Label::Negative, Label::Positive) => self.fn_ += 1,
            (Label::Negative, Label::Negative) => self.tn += 1,
        }
    }

    /// Counts with prediction and truth roles exchanged.
    pub fn transposed(&self) -> Self {
        Self {
            tp: self.tp,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tn,
        }
    }
}

impl Add for ConfusionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

pub fn accumulate_image(pred: Label, truth: Label, counts: ConfusionCounts) -> ConfusionCounts {
    let mut c = counts;
    c.record(pred, truth);
    c
}

/// Per-pixel tally; foreground is the positive class.
pub fn accumulate_pixels(
    pred: &BinaryMask,
    truth: &BinaryMask,
    counts: ConfusionCounts,
) -> Result<ConfusionCounts, MetricsError> {
    let (pd, td) = ((pred.width(), pred.height()), (truth.width(), truth.height()));
    if pd != td {
        return Err(MetricsError::DimensionMismatch(pd, td));
    }
    let mut c = counts;
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        c.record(Label::from_index(p as usize), Label::from_index(t as usize));
    }
    Ok(c)
}

/// Pixel-level tally after discarding predicted components smaller than
/// `min_component`. Ground truth is used as given.
pub fn evaluate_masks(
    pred: &BinaryMask,
    truth: &BinaryMask,
    min_component: usize,
    counts: ConfusionCounts,
) -> Result<ConfusionCounts, MetricsError> {
    let cleaned = if min_component > 1 {
        remove_small_components(pred, min_component)
    } else {
        pred.clone()
    };
    accumulate_pixels(&cleaned, truth, counts)
}

/// Each metric is `None` when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
}

impl MetricsReport {
    pub fn precision(&self) -> Result<f64, MetricsError> {
        self.precision.ok_or(MetricsError::UndefinedMetric("precision"))
    }
    pub fn recall(&self) -> Result<f64, MetricsError> {
        self.recall.ok_or(MetricsError::UndefinedMetric("recall"))
    }
    pub fn accuracy(&self) -> Result<f64, MetricsError> {
        self.accuracy.ok_or(MetricsError::UndefinedMetric("accuracy"))
    }
    pub fn f1(&self) -> Result<f64, MetricsError> {
        self.f1.ok_or(MetricsError::UndefinedMetric("f1"))
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(c: &ConfusionCounts) -> MetricsReport {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let accuracy = ratio(c.tp + c.tn, c.total());
    // 2PR/(P+R) reduces to 2tp/(2tp+fp+fn); the count form rounds only once.
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        _ => None,
    };
    MetricsReport {
        precision,
        recall,
        accuracy,
        f1,
    }
}
