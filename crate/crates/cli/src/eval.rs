use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use roadcrack_core::dataset::{labeled_images, list_images, stem};
use roadcrack_core::metrics::{accumulate_image, evaluate_masks};
use roadcrack_core::{compute_metrics, load_mask, BinaryMask, ConfusionCounts, Label, MetricsReport};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Level {
    /// One crack / no-crack label per image.
    Image,
    /// Binary masks compared pixel by pixel.
    Pixel,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum, default_value_t = Level::Image)]
    pub level: Level,
    /// Predictions: a label CSV (`file`, `label` columns, such as a detect
    /// summary) or a positive/negative folder at image level; a mask folder at
    /// pixel level.
    pub predictions: PathBuf,
    /// Ground truth, in the same forms as the predictions.
    pub truth: PathBuf,
    /// Predicted components smaller than this are dropped (pixel level).
    #[arg(long, default_value_t = 100)]
    pub min_component: usize,
    /// At pixel level, treat a ground-truth mask without a prediction as an
    /// empty prediction (an image the classifier rejected) instead of an error.
    #[arg(long)]
    pub allow_missing: bool,
    /// Method name shown in the report.
    #[arg(long, default_value = "adaptive")]
    pub method: String,
    /// Neighbourhood radius shown in the report.
    #[arg(long, default_value_t = 1)]
    pub tau: usize,
    /// Also write the report row to this CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{stem:?} has a {present} entry but no {missing} entry")]
    MissingPair {
        stem: String,
        present: &'static str,
        missing: &'static str,
    },
    #[error("{stem:?}: prediction is {pred:?} but ground truth is {truth:?}")]
    DimensionMismatch {
        stem: String,
        pred: (usize, usize),
        truth: (usize, usize),
    },
    #[error("{0:?} appears more than once")]
    DuplicateStem(String),
    #[error("{path}: {reason}")]
    BadLabelFile { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub tau: usize,
    pub counts: ConfusionCounts,
    pub metrics: MetricsReport,
}

impl EvalReport {
    fn cells(&self) -> Vec<String> {
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        let m = &self.metrics;
        vec![
            self.method.clone(),
            self.tau.to_string(),
            fmt(m.precision),
            fmt(m.recall),
            fmt(m.accuracy),
            fmt(m.f1),
        ]
    }

    pub fn to_text(&self) -> String {
        let head = ["method", "tau", "precision", "recall", "accuracy", "f1"];
        let cells = self.cells();
        let widths: Vec<usize> = head.iter().zip(&cells).map(|(h, c)| h.len().max(c.len())).collect();
        let mut s = String::new();
        for row in [head.iter().map(|h| h.to_string()).collect::<Vec<_>>(), cells] {
            let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(s, "{}", line.join("  ").trim_end());
        }
        let c = &self.counts;
        let _ = writeln!(s, "tp {} fp {} fn {} tn {}", c.tp, c.fp, c.fn_, c.tn);
        s
    }

    pub fn write_csv(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record([
            "method",
            "tau",
            "precision",
            "recall",
            "accuracy",
            "f1",
            "tp",
            "fp",
            "fn",
            "tn",
        ])?;
        let c = &self.counts;
        let mut row = self.cells();
        row.extend([c.tp, c.fp, c.fn_, c.tn].map(|v| v.to_string()));
        w.write_record(row)?;
        w.flush()?;
        Ok(())
    }
}

fn insert_unique<V>(map: &mut BTreeMap<String, V>, key: String, value: V) -> Result<(), EvalError> {
    if map.contains_key(&key) {
        return Err(EvalError::DuplicateStem(key));
    }
    map.insert(key, value);
    Ok(())
}

/// Stem → label, from a labelled folder or a CSV with `file` (or `stem`) and
/// `label` columns. Rows with an empty label are skipped.
pub fn read_labels(path: &Path) -> anyhow::Result<BTreeMap<String, Label>> {
    let mut out = BTreeMap::new();
    if path.is_dir() {
        for (p, label) in labeled_images(path)? {
            insert_unique(&mut out, stem(&p), label)?;
        }
        return Ok(out);
    }
    let bad = |reason: String| EvalError::BadLabelFile {
        path: path.display().to_string(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let headers = r.headers()?.clone();
    let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h.trim()));
    let file_col = col(&["file", "stem"]).ok_or_else(|| bad("no file column".into()))?;
    let label_col = col(&["label"]).ok_or_else(|| bad("no label column".into()))?;
    for rec in r.records() {
        let rec = rec?;
        let label = rec.get(label_col).unwrap_or("").trim();
        if label.is_empty() {
            continue;
        }
        let label: Label = label.parse().map_err(bad)?;
        let file = rec.get(file_col).unwrap_or("").trim();
        insert_unique(&mut out, stem(Path::new(file)), label)?;
    }
    Ok(out)
}

/// Checks that both maps have the same keys.
fn check_pairs<A, B>(pred: &BTreeMap<String, A>, truth: &BTreeMap<String, B>) -> Result<(), EvalError> {
    if let Some(k) = truth.keys().find(|k| !pred.contains_key(*k)) {
        return Err(EvalError::MissingPair {
            stem: k.clone(),
            present: "ground-truth",
            missing: "prediction",
        });
    }
    if let Some(k) = pred.keys().find(|k| !truth.contains_key(*k)) {
        return Err(EvalError::MissingPair {
            stem: k.clone(),
            present: "prediction",
            missing: "ground-truth",
        });
    }
    Ok(())
}

pub fn image_counts(pred: &Path, truth: &Path) -> anyhow::Result<ConfusionCounts> {
    let (p, t) = (read_labels(pred)?, read_labels(truth)?);
    check_pairs(&p, &t)?;
    Ok(p.iter()
        .fold(ConfusionCounts::default(), |c, (k, &l)| accumulate_image(l, t[k], c)))
}

fn masks_by_stem(dir: &Path) -> anyhow::Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for p in list_images(dir)? {
        insert_unique(&mut out, stem(&p), p)?;
    }
    Ok(out)
}

pub fn pixel_counts(
    pred: &Path,
    truth: &Path,
    min_component: usize,
    allow_missing: bool,
) -> anyhow::Result<ConfusionCounts> {
    let (p, t) = (masks_by_stem(pred)?, masks_by_stem(truth)?);
    if allow_missing {
        if let Some(k) = p.keys().find(|k| !t.contains_key(*k)) {
            let e = EvalError::MissingPair {
                stem: k.clone(),
                present: "prediction",
                missing: "ground-truth",
            };
            return Err(e.into());
        }
    } else {
        check_pairs(&p, &t)?;
    }
    let mut counts = ConfusionCounts::default();
    for (k, tp) in &t {
        let tm = load_mask(tp)?;
        let pm = match p.get(k) {
            Some(pp) => load_mask(pp)?,
            None => BinaryMask::background(tm.width(), tm.height())?,
        };
        let (pd, td) = ((pm.width(), pm.height()), (tm.width(), tm.height()));
        if pd != td {
            return Err(EvalError::DimensionMismatch {
                stem: k.clone(),
                pred: pd,
                truth: td,
            }
            .into());
        }
        counts = evaluate_masks(&pm, &tm, min_component, counts)?;
    }
    Ok(counts)
}

pub fn run(args: &EvalArgs) -> anyhow::Result<EvalReport> {
    let counts = match args.level {
        Level::Image => image_counts(&args.predictions, &args.truth)?,
        Level::Pixel => pixel_counts(&args.predictions, &args.truth, args.min_component, args.allow_missing)?,
    };
    let report = EvalReport {
        method: args.method.clone(),
        tau: args.tau,
        counts,
        metrics: compute_metrics(&counts),
    };
    print!("{}", report.to_text());
    if let Some(path) = &args.csv {
        crate::create_parent(path)?;
        report.write_csv(path)?;
    }
    Ok(report)
}
