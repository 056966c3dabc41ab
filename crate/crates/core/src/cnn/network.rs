use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ops::{self, BatchNormCache};
use super::tensor::Tensor;
use super::CnnError;

/// One conv → batch-norm → ReLU unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlockSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvBlockSpec {
    /// A same-padded 3x3 block.
    pub fn same3x3(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel: 3,
            stride: 1,
            padding: 1,
        }
    }

    fn validate(&self) -> Result<(), CnnError> {
        if self.in_channels == 0 || self.out_channels == 0 || self.kernel == 0 || self.stride == 0 {
            return Err(CnnError::InvalidArchitecture(format!(
                "block fields must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Layout of the classifier: a stack of conv blocks, each followed by max
/// pooling, then a dense layer onto the two classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub blocks: Vec<ConvBlockSpec>,
    pub pool_window: usize,
    pub pool_stride: usize,
    pub bn_eps: f64,
    /// Weight of the newest batch in the running-statistics update.
    pub bn_momentum: f64,
}

pub const NUM_CLASSES: usize = 2;

impl Default for ArchConfig {
    fn default() -> Self {
        Self::with_channels(227, 227, &[16, 32, 64])
    }
}

impl ArchConfig {
    pub fn with_channels(input_height: usize, input_width: usize, channels: &[usize]) -> Self {
        let mut blocks = Vec::with_capacity(channels.len());
        let mut prev = 3;
        for &c in channels {
            blocks.push(ConvBlockSpec::same3x3(prev, c));
            prev = c;
        }
        Self {
            input_channels: 3,
            input_height,
            input_width,
            blocks,
            pool_window: 2,
            pool_stride: 2,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
        }
    }

    /// Validates the block chain and returns the flattened feature length
    /// seen by the dense layer.
    pub fn feature_len(&self) -> Result<usize, CnnError> {
        if self.input_channels == 0 || self.input_height == 0 || self.input_width == 0 {
            return Err(CnnError::InvalidArchitecture(
                "input dimensions must be positive".into(),
            ));
        }
        if self.blocks.is_empty() {
            return Err(CnnError::InvalidArchitecture(
                "at least one conv block is required".into(),
            ));
        }
        let (mut c, mut h, mut w) = (self.input_channels, self.input_height, self.input_width);
        for b in &self.blocks {
            b.validate()?;
            if b.in_channels != c {
                return Err(CnnError::InvalidArchitecture(format!(
                    "block expects {} input channels but receives {c}",
                    b.in_channels
                )));
            }
            h = ops::conv_output_size(h, b.kernel, b.stride, b.padding)
                .map_err(|e| CnnError::InvalidArchitecture(e.to_string()))?;
            w = ops::conv_output_size(w, b.kernel, b.stride, b.padding)
                .map_err(|e| CnnError::InvalidArchitecture(e.to_string()))?;
            if h < self.pool_window || w < self.pool_window || self.pool_stride == 0 || self.pool_window == 0 {
                return Err(CnnError::InvalidArchitecture(format!(
                    "feature map {h}x{w} too small for pooling"
                )));
            }
            h = (h - self.pool_window) / self.pool_stride + 1;
            w = (w - self.pool_window) / self.pool_stride + 1;
            c = b.out_channels;
        }
        Ok(c * h * w)
    }

    pub fn input_shape(&self, batch: usize) -> [usize; 4] {
        [batch, self.input_channels, self.input_height, self.input_width]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Conv {
        weight: Tensor,
        bias: Tensor,
        stride: usize,
        padding: usize,
    },
    BatchNorm {
        gamma: Tensor,
        beta: Tensor,
        running_mean: Tensor,
        running_var: Tensor,
        eps: f64,
        momentum: f64,
    },
    Relu,
    MaxPool {
        window: usize,
        stride: usize,
    },
    /// Flattens its input to `[N, D]` first.
    Dense {
        weight: Tensor,
        bias: Tensor,
    },
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv { .. } => "conv",
            Layer::BatchNorm { .. } => "batch_norm",
            Layer::Relu => "relu",
            Layer::MaxPool { .. } => "max_pool",
            Layer::Dense { .. } => "dense",
        }
    }

    fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias } => vec![weight, bias],
            Layer::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            Layer::Relu | Layer::MaxPool { .. } => vec![],
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias } => vec![weight, bias],
            Layer::BatchNorm { gamma, beta, .. } => vec![gamma, beta],
            Layer::Relu | Layer::MaxPool { .. } => vec![],
        }
    }
}

#[derive(Debug, Clone)]
enum LayerCache {
    Conv {
        input: Tensor,
    },
    BatchNorm(BatchNormCache),
    Relu {
        input: Tensor,
    },
    MaxPool {
        input_shape: Vec<usize>,
        argmax: Vec<usize>,
    },
    Dense {
        input: Tensor,
        input_shape: Vec<usize>,
    },
}

fn flatten(x: &Tensor) -> Result<Tensor, CnnError> {
    let n = x.shape().first().copied().unwrap_or(0);
    let d = x.len().checked_div(n).unwrap_or(0);
    x.clone().reshaped(vec![n, d])
}

/// Sequential network producing class logits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
    #[serde(skip)]
    cache: Option<Vec<LayerCache>>,
}

/// Networks compare by their layers; cached activations are ignored.
impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Network {
    pub fn from_layers(layers: Vec<Layer>) -> Self {
        Self { layers, cache: None }
    }

    /// Builds the network for `arch` with He-normal conv weights drawn from
    /// a generator seeded with `seed`.
    pub fn new(arch: &ArchConfig, seed: u64) -> Result<Self, CnnError> {
        let features = arch.feature_len()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for b in &arch.blocks {
            let fan_in = b.in_channels * b.kernel * b.kernel;
            let std = (2.0 / fan_in as f64).sqrt();
            let dist = Normal::new(0.0, std).expect("finite std");
            layers.push(Layer::Conv {
                weight: Tensor::from_fn(&[b.out_channels, b.in_channels, b.kernel, b.kernel], |_| {
                    dist.sample(&mut rng)
                }),
                bias: Tensor::zeros(&[b.out_channels]),
                stride: b.stride,
                padding: b.padding,
            });
            layers.push(Layer::BatchNorm {
                gamma: Tensor::filled(&[b.out_channels], 1.0),
                beta: Tensor::zeros(&[b.out_channels]),
                running_mean: Tensor::zeros(&[b.out_channels]),
                running_var: Tensor::filled(&[b.out_channels], 1.0),
                eps: arch.bn_eps,
                momentum: arch.bn_momentum,
            });
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool {
                window: arch.pool_window,
                stride: arch.pool_stride,
            });
        }
        let dist = Normal::new(0.0, (1.0 / features as f64).sqrt()).expect("finite std");
        layers.push(Layer::Dense {
            weight: Tensor::from_fn(&[NUM_CLASSES, features], |_| dist.sample(&mut rng)),
            bias: Tensor::zeros(&[NUM_CLASSES]),
        });
        Ok(Self { layers, cache: None })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Learnable tensors in a fixed order (per layer: weight/γ, then bias/β).
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    /// Training-mode forward pass. Batch-norm layers normalise with batch
    /// statistics and fold them into their running averages; activations are
    /// cached for [`Network::backward`].
    pub fn forward_train(&mut self, x: &Tensor) -> Result<Tensor, CnnError> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut act = x.clone();
        for layer in &mut self.layers {
            let (next, cache) = match layer {
                Layer::Conv {
                    weight,
                    bias,
                    stride,
                    padding,
                } => {
                    let y = ops::conv2d_forward(&act, weight, bias, *stride, *padding)?;
                    (y, LayerCache::Conv { input: act })
                }
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    eps,
                    momentum,
                } => {
                    let (y, cache) = ops::batchnorm_forward(&act, gamma, beta, *eps)?;
                    let m = *momentum;
                    for (r, b) in running_mean.data_mut().iter_mut().zip(&cache.mean) {
                        *r = (1.0 - m) * *r + m * b;
                    }
                    for (r, b) in running_var.data_mut().iter_mut().zip(&cache.var) {
                        *r = (1.0 - m) * *r + m * b;
                    }
                    (y, LayerCache::BatchNorm(cache))
                }
                Layer::Relu => (ops::relu(&act), LayerCache::Relu { input: act }),
                Layer::MaxPool { window, stride } => {
                    let (y, argmax) = ops::maxpool2d(&act, *window, *stride)?;
                    (
                        y,
                        LayerCache::MaxPool {
                            input_shape: act.shape().to_vec(),
                            argmax,
                        },
                    )
                }
                Layer::Dense { weight, bias } => {
                    let input_shape = act.shape().to_vec();
                    let flat = flatten(&act)?;
                    let y = ops::dense_forward(&flat, weight, bias)?;
                    (
                        y,
                        LayerCache::Dense {
                            input: flat,
                            input_shape,
                        },
                    )
                }
            };
            caches.push(cache);
            act = next;
        }
        self.cache = Some(caches);
        Ok(act)
    }

    /// Inference-mode forward pass using running batch-norm statistics.
    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor, CnnError> {
        let mut act = x.clone();
        for layer in &self.layers {
            act = match layer {
                Layer::Conv {
                    weight,
                    bias,
                    stride,
                    padding,
                } => ops::conv2d_forward(&act, weight, bias, *stride, *padding)?,
                Layer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    eps,
                    ..
                } => ops::batchnorm_inference(&act, gamma, beta, running_mean, running_var, *eps)?,
                Layer::Relu => ops::relu(&act),
                Layer::MaxPool { window, stride } => ops::maxpool2d(&act, *window, *stride)?.0,
                Layer::Dense { weight, bias } => ops::dense_forward(&flatten(&act)?, weight, bias)?,
            };
        }
        Ok(act)
    }

    /// Back-propagates `grad_logits` through the cached forward pass and
    /// returns one gradient per tensor of [`Network::params`], in order. The
    /// cache is consumed.
    pub fn backward(&mut self, grad_logits: &Tensor) -> Result<Vec<Tensor>, CnnError> {
        let caches = self.cache.take().ok_or(CnnError::StaleCache)?;
        let mut per_layer: Vec<Vec<Tensor>> = vec![Vec::new(); self.layers.len()];
        let mut grad = grad_logits.clone();
        for (i, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            grad = match (layer, cache) {
                (
                    Layer::Conv {
                        weight,
                        stride,
                        padding,
                        ..
                    },
                    LayerCache::Conv { input },
                ) => {
                    let (dx, dw, db) = ops::conv2d_backward(&input, weight, &grad, *stride, *padding)?;
                    per_layer[i] = vec![dw, db];
                    dx
                }
                (Layer::BatchNorm { gamma, .. }, LayerCache::BatchNorm(cache)) => {
                    let (dx, dg, db) = ops::batchnorm_backward(&cache, gamma, &grad)?;
                    per_layer[i] = vec![dg, db];
                    dx
                }
                (Layer::Relu, LayerCache::Relu { input }) => ops::relu_backward(&input, &grad)?,
                (Layer::MaxPool { .. }, LayerCache::MaxPool { input_shape, argmax }) => {
                    ops::maxpool2d_backward(&input_shape, &argmax, &grad)?
                }
                (Layer::Dense { weight, .. }, LayerCache::Dense { input, input_shape }) => {
                    let (dx, dw, db) = ops::dense_backward(&input, weight, &grad)?;
                    per_layer[i] = vec![dw, db];
                    dx.reshaped(input_shape)?
                }
                _ => return Err(CnnError::StaleCache),
            };
        }
        Ok(per_layer.into_iter().flatten().collect())
    }
}
