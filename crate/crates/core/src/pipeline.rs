//! Segmentation of a positive image: bilateral filter, threshold selection,
//! thresholding at full resolution and small-component suppression.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::components::{remove_small_components, DEFAULT_MIN_COMPONENT};
use crate::filter::{bilateral_filter, BilateralParams, FilterError};
use crate::otsu::otsu_threshold;
use crate::raster::{BinaryMask, GrayImage};
use crate::threshold::{adaptive_threshold, segment, ThresholdError, ThresholdResult, DEFAULT_BINS, DEFAULT_TAU};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// 2D-histogram WCSS threshold.
    #[default]
    Adaptive,
    /// Otsu's threshold on the filtered image.
    Otsu,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Adaptive => "adaptive",
            Method::Otsu => "otsu",
        })
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adaptive" => Ok(Method::Adaptive),
            "otsu" => Ok(Method::Otsu),
            other => Err(format!("unknown method {other:?} (expected adaptive or otsu)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub bilateral: BilateralParams,
    pub tau: usize,
    pub bins: usize,
    pub min_component: usize,
    pub method: Method,
    pub model_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            bilateral: BilateralParams::default(),
            tau: DEFAULT_TAU,
            bins: DEFAULT_BINS,
            min_component: DEFAULT_MIN_COMPONENT,
            method: Method::Adaptive,
            model_path: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.bilateral.validate()?;
        if self.tau < 1 {
            return Err(PipelineError::InvalidConfig("tau must be at least 1".into()));
        }
        if self.bins < 2 {
            return Err(PipelineError::InvalidConfig("bins must be at least 2".into()));
        }
        if self.min_component < 1 {
            return Err(PipelineError::InvalidConfig(
                "min component size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub filtered: GrayImage,
    /// Threshold applied to the filtered image.
    pub delta: f64,
    /// Search details; present for the adaptive method only.
    pub threshold: Option<ThresholdResult>,
    /// Mask after small-component suppression.
    pub mask: BinaryMask,
}

pub fn segment_image(gray: &GrayImage, cfg: &PipelineConfig) -> Result<Segmentation, PipelineError> {
    cfg.validate()?;
    let filtered = bilateral_filter(gray, &cfg.bilateral)?;
    let (delta, threshold) = match cfg.method {
        Method::Adaptive => {
            let t = adaptive_threshold(&filtered, cfg.tau, cfg.bins)?;
            (t.delta, Some(t))
        }
        Method::Otsu => (otsu_threshold(&filtered)?, None),
    };
    let raw = segment(&filtered, delta)?;
    let mask = remove_small_components(&raw, cfg.min_component);
    Ok(Segmentation {
        filtered,
        delta,
        threshold,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{crack_image, CrackStyle};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn defaults_follow_reported_constants() {
        let cfg = PipelineConfig::default();
        assert_eq!(
            cfg.bilateral,
            BilateralParams {
                sigma_s: 300.0,
                sigma_c: 0.1,
                rho: 5
            }
        );
        assert_eq!(
            (cfg.tau, cfg.bins, cfg.min_component, cfg.method),
            (1, 256, 100, Method::Adaptive)
        );
    }

    #[test]
    fn invalid_config() {
        let cfg = PipelineConfig {
            tau: 0,
            ..PipelineConfig::default()
        };
        let img = GrayImage::filled(9, 9, 0.5).unwrap();
        assert!(matches!(
            segment_image(&img, &cfg),
            Err(PipelineError::InvalidConfig(_))
        ));
    }

    #[test]
    fn flat_image_is_degenerate() {
        let img = GrayImage::filled(30, 30, 0.5).unwrap();
        assert_eq!(
            segment_image(&img, &PipelineConfig::default()).unwrap_err(),
            PipelineError::Threshold(ThresholdError::DegenerateHistogram)
        );
    }

    #[test]
    fn finds_synthetic_crack() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let img = crack_image(&CrackStyle::sized(96, 96), &mut rng);
        let seg = segment_image(&img.gray, &PipelineConfig::default()).unwrap();
        assert!(seg.delta > 0.2 && seg.delta < 0.65, "delta {}", seg.delta);
        let hits = seg
            .mask
            .labels()
            .iter()
            .zip(img.truth.labels())
            .filter(|(a, b)| **a && **b)
            .count();
        assert!(hits as f64 > 0.9 * img.truth.foreground_count() as f64);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("otsu".parse::<Method>().unwrap(), Method::Otsu);
        assert!("kmeans".parse::<Method>().is_err());
        assert_eq!(Method::Adaptive.to_string(), "adaptive");
    }
}
