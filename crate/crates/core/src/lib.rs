//! Road crack detection.
//!
//! Detection runs in two stages:
//!
//! 1. **Classification**: a small convolutional network ([`cnn`]) decides
//!    whether an image shows a crack.
//! 2. **Segmentation**: positive images are smoothed with a bilateral filter
//!    ([`filter`]), a threshold is chosen by minimising the within-cluster
//!    sum of squares over a 2D (intensity, neighbourhood mean) histogram of
//!    the downsampled image ([`threshold`]), and connected components that
//!    are too small to be cracks are dropped ([`components`]).
//!
//! [`metrics`] scores results at image or pixel level, and [`otsu`] provides
//! the global-threshold baseline.

pub mod cnn;
pub mod components;
pub mod dataset;
pub mod filter;
pub mod metrics;
pub mod otsu;
pub mod pipeline;
pub mod raster;
pub mod synth;
pub mod threshold;

pub use cnn::{ArchConfig, Classification, Classifier, CnnError, ConvBlockSpec, Sample, Tensor, TrainConfig, TrainLog};
pub use components::remove_small_components;
pub use dataset::DatasetError;
pub use filter::{bilateral_filter, BilateralParams, FilterError};
pub use metrics::{compute_metrics, ConfusionCounts, Label, MetricsError, MetricsReport};
pub use otsu::otsu_threshold;
pub use pipeline::{segment_image, Method, PipelineConfig, PipelineError, Segmentation};
pub use raster::{load_image, load_mask, save_mask, to_grayscale, BinaryMask, GrayImage, ImageError, RgbImage};
pub use threshold::{find_threshold, Histogram2D, ThresholdError, ThresholdResult};
