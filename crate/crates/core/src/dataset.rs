//! Labelled image folders: `<root>/positive/*` and `<root>/negative/*`.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::metrics::Label;

pub const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} has neither a positive/ nor a negative/ subdirectory")]
    MissingClassDirs(String),
    #[error("train fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// File stem used to pair images, masks and label rows.
pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// PNG and JPEG files directly inside `dir`, sorted by path.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, DatasetError> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_file() && has_image_extension(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Subdirectory of `root` named `name`, compared case-insensitively.
fn class_dir(root: &Path, name: &str) -> Result<Option<PathBuf>, DatasetError> {
    let mut found = None;
    for entry in std::fs::read_dir(root).map_err(io_err(root))? {
        let path = entry.map_err(io_err(root))?.path();
        let matches = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.eq_ignore_ascii_case(name));
        if matches && path.is_dir() && found.as_ref().is_none_or(|f: &PathBuf| path < *f) {
            found = Some(path);
        }
    }
    Ok(found)
}

/// Every image under `root/positive` and `root/negative` with its label,
/// negatives first, each class sorted by path. A missing class directory
/// contributes nothing; missing both is an error.
pub fn labeled_images(root: impl AsRef<Path>) -> Result<Vec<(PathBuf, Label)>, DatasetError> {
    let root = root.as_ref();
    let mut out = Vec::new();
    let mut any = false;
    for label in [Label::Negative, Label::Positive] {
        if let Some(dir) = class_dir(root, label.as_str())? {
            any = true;
            out.extend(list_images(&dir)?.into_iter().map(|p| (p, label)));
        }
    }
    if !any {
        return Err(DatasetError::MissingClassDirs(root.display().to_string()));
    }
    Ok(out)
}

/// Seeded shuffle, then the first `round(n·train_fraction)` items form the
/// training part.
pub fn split<T>(mut items: Vec<T>, train_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>), DatasetError> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(DatasetError::InvalidFraction(train_fraction));
    }
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((items.len() as f64) * train_fraction).round() as usize;
    let rest = items.split_off(n_train.min(items.len()));
    Ok((items, rest))
}
