use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{ArchConfig, Layer, Network};
use super::ops;
use super::tensor::Tensor;
use super::CnnError;
use crate::metrics::Label;
use crate::raster::RgbImage;

pub const CHECKPOINT_FORMAT: &str = "roadcrack-classifier";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: Label,
    /// `[p(negative), p(positive)]`.
    pub probabilities: [f64; 2],
}

impl Classification {
    /// Positive only when its probability strictly exceeds the negative one.
    pub fn from_probabilities(probabilities: [f64; 2]) -> Self {
        let label = if probabilities[1] > probabilities[0] {
            Label::Positive
        } else {
            Label::Negative
        };
        Self { label, probabilities }
    }

    pub fn positive_probability(&self) -> f64 {
        self.probabilities[1]
    }
}

/// Channel-first tensor `[1, 3, H, W]` with each channel scaled to `[0, 1]`.
pub fn image_to_tensor(img: &RgbImage, arch: &ArchConfig) -> Result<Tensor, CnnError> {
    if arch.input_channels != 3 || img.width() != arch.input_width || img.height() != arch.input_height {
        return Err(CnnError::ShapeMismatch(format!(
            "image {}x{} (3 channels) does not match model input {}x{} ({} channels)",
            img.width(),
            img.height(),
            arch.input_width,
            arch.input_height,
            arch.input_channels
        )));
    }
    let plane = img.width() * img.height();
    let mut data = vec![0.0; 3 * plane];
    for (i, px) in img.pixels().iter().enumerate() {
        for c in 0..3 {
            data[c * plane + i] = px[c] as f64 / 255.0;
        }
    }
    Ok(Tensor::from_parts(vec![1, 3, img.height(), img.width()], data))
}

/// A trained network together with the architecture that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    arch: ArchConfig,
    network: Network,
}

#[derive(Serialize)]
struct CheckpointRef<'a> {
    format: &'a str,
    version: u32,
    arch: &'a ArchConfig,
    layers: &'a [Layer],
}

#[derive(Deserialize)]
struct CheckpointOwned {
    format: String,
    version: u32,
    arch: ArchConfig,
    layers: Vec<Layer>,
}

impl Classifier {
    pub fn new(arch: ArchConfig, network: Network) -> Result<Self, CnnError> {
        let features = arch.feature_len()?;
        let mut dense = network.layers().iter().filter_map(|l| match l {
            Layer::Dense { weight, .. } => Some(weight.shape().to_vec()),
            _ => None,
        });
        match dense.next() {
            Some(shape) if shape == [super::NUM_CLASSES, features] => Ok(Self { arch, network }),
            other => Err(CnnError::InvalidArchitecture(format!(
                "network dense layer {other:?} does not match architecture ({features} features)"
            ))),
        }
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    pub fn classify_tensor(&self, x: &Tensor) -> Result<Vec<Classification>, CnnError> {
        let probs = ops::softmax(&self.network.forward_eval(x)?)?;
        Ok(probs
            .data()
            .chunks(2)
            .map(|p| Classification::from_probabilities([p[0], p[1]]))
            .collect())
    }

    /// Classifies an image already at the model's input resolution.
    pub fn classify(&self, img: &RgbImage) -> Result<Classification, CnnError> {
        let x = image_to_tensor(img, &self.arch)?;
        Ok(self.classify_tensor(&x)?[0])
    }

    pub fn to_json(&self) -> Result<String, CnnError> {
        serde_json::to_string(&CheckpointRef {
            format: CHECKPOINT_FORMAT,
            version: CHECKPOINT_VERSION,
            arch: &self.arch,
            layers: self.network.layers(),
        })
        .map_err(|e| CnnError::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, CnnError> {
        let ck: CheckpointOwned = serde_json::from_str(text).map_err(|e| CnnError::Checkpoint(e.to_string()))?;
        Self::from_checkpoint(ck)
    }

    fn from_checkpoint(ck: CheckpointOwned) -> Result<Self, CnnError> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(CnnError::Checkpoint(format!("unknown format {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(CnnError::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        Self::new(ck.arch, Network::from_layers(ck.layers))
    }

    /// Writes a self-describing JSON checkpoint.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CnnError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_json()?.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CnnError> {
        let r = BufReader::new(File::open(path)?);
        let ck: CheckpointOwned = serde_json::from_reader(r).map_err(|e| CnnError::Checkpoint(e.to_string()))?;
        Self::from_checkpoint(ck)
    }
}
