use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;
use roadcrack_core::cnn::{evaluate, train};
use roadcrack_core::dataset::{labeled_images, split};
use roadcrack_core::{load_image, ArchConfig, Classifier, Sample, TrainConfig, TrainLog};

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Directory with `positive/` and `negative/` subdirectories.
    pub dataset: PathBuf,
    /// Checkpoint path.
    #[arg(long, short, default_value = "model.json")]
    pub out: PathBuf,
    /// Training log (CSV); defaults to the checkpoint path with a `.log.csv` suffix.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Share of images used for training; the rest is used for validation.
    #[arg(long, default_value_t = 0.75)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 16)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// Validate every this many iterations.
    #[arg(long, default_value_t = 60)]
    pub validation_frequency: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Images are resized to a square of this side before training.
    #[arg(long, default_value_t = 227)]
    pub input_size: usize,
    /// Output channels of each conv block.
    #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
    pub channels: Vec<usize>,
}

pub struct TrainOutcome {
    pub model: Classifier,
    pub log: TrainLog,
    pub train_images: usize,
    pub validation_images: usize,
    /// Inference-mode `(loss, accuracy)` on the validation part, if any.
    pub validation: Option<(f64, f64)>,
}

fn load_samples(items: &[(PathBuf, roadcrack_core::Label)], side: usize) -> anyhow::Result<Vec<Sample>> {
    items
        .par_iter()
        .map(|(path, label)| {
            let img = load_image(path)?.resized(side, side)?;
            Ok(Sample {
                image: img,
                label: *label,
            })
        })
        .collect()
}

pub fn run(args: &TrainArgs) -> anyhow::Result<TrainOutcome> {
    let arch = ArchConfig::with_channels(args.input_size, args.input_size, &args.channels);
    arch.feature_len()?;
    let cfg = TrainConfig {
        learning_rate: args.learning_rate,
        max_epochs: args.epochs,
        validation_frequency: args.validation_frequency,
        momentum: args.momentum,
        batch_size: args.batch_size,
        seed: args.seed,
    };
    cfg.validate()?;

    let items = labeled_images(&args.dataset)?;
    let (train_items, val_items) = split(items, args.train_fraction, args.seed)?;
    let train_set = load_samples(&train_items, args.input_size)?;
    let val_set = load_samples(&val_items, args.input_size)?;

    let (model, log) = train(&train_set, &val_set, &arch, &cfg)?;
    let validation = if val_set.is_empty() {
        None
    } else {
        Some(evaluate(&model, &val_set, cfg.batch_size)?)
    };

    crate::create_parent(&args.out)?;
    model
        .save(&args.out)
        .with_context(|| format!("cannot save {}", args.out.display()))?;
    let log_path = args.log.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".log.csv");
        p.into()
    });
    crate::create_parent(&log_path)?;
    let file = std::fs::File::create(&log_path).with_context(|| format!("cannot write {}", log_path.display()))?;
    log.write_csv(file)?;

    println!(
        "trained on {} images, validated on {}; checkpoint {}",
        train_set.len(),
        val_set.len(),
        args.out.display()
    );
    if let Some((loss, acc)) = validation {
        println!("validation loss {loss:.4}, accuracy {acc:.4}");
    }
    Ok(TrainOutcome {
        model,
        log,
        train_images: train_set.len(),
        validation_images: val_set.len(),
        validation,
    })
}
