use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use rayon::prelude::*;
use roadcrack_core::dataset::stem;
use roadcrack_core::threshold::ThresholdResult;
use roadcrack_core::{
    load_image, save_mask, segment_image, to_grayscale, BilateralParams, Classification, Classifier, Label, Method,
    PipelineConfig,
};

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    /// Image files or directories of images.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Classifier checkpoint written by `train`.
    #[arg(long, required_unless_present = "no_classifier")]
    pub model: Option<PathBuf>,
    /// Segment every image without classifying it first.
    #[arg(long, conflicts_with = "model")]
    pub no_classifier: bool,
    /// Neighbourhood radius for the 2D histogram.
    #[arg(long, default_value_t = 1)]
    pub tau: usize,
    #[arg(long, default_value_t = 256)]
    pub bins: usize,
    #[arg(long, default_value_t = 300.0)]
    pub sigma_s: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_c: f64,
    #[arg(long, default_value_t = 5)]
    pub rho: usize,
    /// Foreground components smaller than this many pixels are dropped.
    #[arg(long, default_value_t = 100)]
    pub min_component: usize,
    #[arg(long, default_value_t = Method::Adaptive)]
    pub method: Method,
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
}

impl DetectArgs {
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            bilateral: BilateralParams {
                sigma_s: self.sigma_s,
                sigma_c: self.sigma_c,
                rho: self.rho,
            },
            tau: self.tau,
            bins: self.bins,
            min_component: self.min_component,
            method: self.method,
            model_path: self.model.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    /// Classified negative; nothing segmented.
    Negative,
    Segmented {
        delta: f64,
        foreground_pixels: usize,
    },
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectRecord {
    pub file: String,
    pub classification: Option<Classification>,
    pub status: Status,
}

fn write_curve(path: &Path, t: &ThresholdResult) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["delta", "wcss"])?;
    for (delta, wcss) in t.curve_points() {
        w.write_record([delta.to_string(), wcss.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn process(
    path: &Path,
    model: Option<&Classifier>,
    cfg: &PipelineConfig,
    out: &Path,
) -> anyhow::Result<(Option<Classification>, Status)> {
    let img = load_image(path)?;
    let classification = match model {
        Some(m) => {
            let arch = m.arch();
            let c = m.classify(&img.resized(arch.input_width, arch.input_height)?)?;
            if c.label == Label::Negative {
                return Ok((Some(c), Status::Negative));
            }
            Some(c)
        }
        None => None,
    };
    let seg = segment_image(&to_grayscale(&img), cfg)?;
    let name = stem(path);
    save_mask(&seg.mask, out.join("masks").join(format!("{name}.png")))?;
    if let Some(t) = &seg.threshold {
        write_curve(&out.join("curves").join(format!("{name}.csv")), t)?;
    }
    Ok((
        classification,
        Status::Segmented {
            delta: seg.delta,
            foreground_pixels: seg.mask.foreground_count(),
        },
    ))
}

fn write_summary(path: &Path, records: &[DetectRecord], method: Method) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record([
        "file",
        "label",
        "p_positive",
        "method",
        "delta",
        "foreground_pixels",
        "status",
    ])?;
    for r in records {
        let (label, p) = match &r.classification {
            Some(c) => (c.label.to_string(), c.positive_probability().to_string()),
            None => (String::new(), String::new()),
        };
        let (delta, fg, status) = match &r.status {
            Status::Negative => (String::new(), String::new(), "negative".to_string()),
            Status::Segmented {
                delta,
                foreground_pixels,
            } => (
                delta.to_string(),
                foreground_pixels.to_string(),
                "segmented".to_string(),
            ),
            Status::Failed(msg) => (String::new(), String::new(), format!("error: {msg}")),
        };
        w.write_record([r.file.clone(), label, p, method.to_string(), delta, fg, status])?;
    }
    w.flush()?;
    Ok(())
}

/// Processes every input, writing masks, WCSS curves and `summary.csv`
/// under `args.out`. Individual failures are reported and skipped; the call
/// fails only when no image could be processed.
pub fn run(args: &DetectArgs) -> anyhow::Result<Vec<DetectRecord>> {
    let cfg = args.pipeline_config();
    cfg.validate()?;
    let model = match &args.model {
        Some(p) if !args.no_classifier => {
            Some(Classifier::load(p).with_context(|| format!("cannot load model {}", p.display()))?)
        }
        _ => None,
    };
    let files = crate::collect_inputs(&args.inputs)?;
    if files.is_empty() {
        bail!("no input images found");
    }
    let mut seen = std::collections::HashSet::new();
    for f in &files {
        if !seen.insert(stem(f)) {
            bail!(
                "two inputs share the file stem {:?}; output names would collide",
                stem(f)
            );
        }
    }
    crate::create_dir(&args.out.join("masks"))?;
    if cfg.method == Method::Adaptive {
        crate::create_dir(&args.out.join("curves"))?;
    }

    let mut records: Vec<DetectRecord> = files
        .par_iter()
        .map(|path| {
            let file = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            match process(path, model.as_ref(), &cfg, &args.out) {
                Ok((classification, status)) => DetectRecord {
                    file,
                    classification,
                    status,
                },
                Err(e) => {
                    eprintln!("{}: {e:#}", path.display());
                    DetectRecord {
                        file,
                        classification: None,
                        status: Status::Failed(format!("{e:#}")),
                    }
                }
            }
        })
        .collect();
    records.sort_by(|a, b| a.file.cmp(&b.file));

    write_summary(&args.out.join("summary.csv"), &records, cfg.method)?;
    if records.iter().all(|r| matches!(r.status, Status::Failed(_))) {
        bail!("all {} images failed", records.len());
    }
    Ok(records)
}
