//! Command-line front end for `roadcrack-core`.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub mod detect;
pub mod eval;
pub mod synth;
pub mod train;

#[derive(Debug, Parser)]
#[command(name = "roadcrack", version, about = "Road crack classification and segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify images and segment the ones that contain cracks.
    Detect(detect::DetectArgs),
    /// Train the crack classifier on a positive/negative image folder.
    Train(train::TrainArgs),
    /// Score predictions against ground truth at image or pixel level.
    Eval(eval::EvalArgs),
    /// Write a synthetic labelled dataset with ground-truth masks.
    Synth(synth::SynthArgs),
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Detect(args) => detect::run(&args).map(|_| ()),
        Command::Train(args) => train::run(&args).map(|_| ()),
        Command::Eval(args) => eval::run(&args).map(|_| ()),
        Command::Synth(args) => synth::run(&args),
    }
}

pub(crate) fn create_dir(path: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(path).map_err(|e| anyhow::anyhow!("cannot create {}: {e}", path.display()))
}

pub(crate) fn create_parent(path: &Path) -> anyhow::Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

/// Expands directories into their image files; plain paths are kept as given.
pub(crate) fn collect_inputs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            files.extend(roadcrack_core::dataset::list_images(p)?);
        } else {
            files.push(p.clone());
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}
