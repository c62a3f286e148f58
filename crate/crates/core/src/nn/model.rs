//! Declarative model description and a sequential model built from it.

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::conv::Conv2d;
use crate::nn::dense::Dense;
use crate::nn::loss::softmax_cross_entropy;
use crate::pooling::{
    max_pool2x2_backward, max_pool2x2_forward, nirmal_backward, nirmal_forward, PoolCache,
};
use crate::tensor::{relu, Shape4, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoolingVariant {
    /// Adaptive max pooling with fused ReLU.
    Nirmal,
    /// Fixed 2×2 stride-2 max pooling.
    Max2x2,
}

/// Where the network's nonlinearities sit relative to the convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationPlacement {
    /// `conv → relu → pool`.
    AfterConv,
    /// `conv → pool`; the pooling layer supplies the only nonlinearity.
    PoolOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoolLayout {
    /// A pooling layer after every convolution.
    Interleaved,
    /// One pooling layer after the last convolution.
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerSpec {
    Conv { filters: usize, kernel: usize },
    Relu,
    NirmalPool { target_h: usize, target_w: usize },
    MaxPool2x2,
    Flatten,
    Dense { units: usize },
}

/// Knobs for [`ModelSpec::build`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    /// `(height, width, channels)` of one input image.
    pub input: (usize, usize, usize),
    pub conv_filters: Vec<usize>,
    pub kernel: usize,
    pub hidden_units: Vec<usize>,
    pub classes: usize,
    pub pooling: PoolingVariant,
    pub placement: ActivationPlacement,
    pub layout: PoolLayout,
    /// Explicit NIRMAL targets per pooling stage. Missing entries default to
    /// halving the incoming extent (rounded down, at least 1).
    pub pool_targets: Vec<(usize, usize)>,
}

impl Architecture {
    /// Two 3×3 convolutions (32 and 64 filters), pooling after each, a
    /// 128-unit hidden layer and a 10-way output.
    pub fn reference(
        input: (usize, usize, usize),
        pooling: PoolingVariant,
        placement: ActivationPlacement,
    ) -> Self {
        Architecture {
            input,
            conv_filters: alloc::vec![32, 64],
            kernel: 3,
            hidden_units: alloc::vec![128],
            classes: 10,
            pooling,
            placement,
            layout: PoolLayout::Interleaved,
            pool_targets: Vec::new(),
        }
    }
}

/// Ordered layer descriptors plus the input extents they were composed for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub input: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
    pub pooling_variant: PoolingVariant,
    pub activation_placement: ActivationPlacement,
}

impl ModelSpec {
    pub fn build(arch: &Architecture) -> Result<Self> {
        if arch.conv_filters.is_empty() {
            return Err(Error::Param("at least one convolution is required".into()));
        }
        let (mut h, mut w, _) = arch.input;
        let mut layers = Vec::new();
        let mut stage = 0;
        let last = arch.conv_filters.len() - 1;
        for (k, &filters) in arch.conv_filters.iter().enumerate() {
            layers.push(LayerSpec::Conv {
                filters,
                kernel: arch.kernel,
            });
            if h < arch.kernel || w < arch.kernel {
                return Err(Error::Param(format!(
                    "convolution {k} sees {h}x{w}, smaller than its {0}x{0} kernel",
                    arch.kernel
                )));
            }
            h = h - arch.kernel + 1;
            w = w - arch.kernel + 1;
            if arch.placement == ActivationPlacement::AfterConv {
                layers.push(LayerSpec::Relu);
            }
            if arch.layout == PoolLayout::Interleaved || k == last {
                let pool = match arch.pooling {
                    PoolingVariant::Nirmal => {
                        let (target_h, target_w) = arch
                            .pool_targets
                            .get(stage)
                            .copied()
                            .unwrap_or(((h / 2).max(1), (w / 2).max(1)));
                        LayerSpec::NirmalPool { target_h, target_w }
                    }
                    PoolingVariant::Max2x2 => LayerSpec::MaxPool2x2,
                };
                layers.push(pool);
                let out = spatial_after(pool, h, w)?;
                h = out.0;
                w = out.1;
                stage += 1;
            }
        }
        layers.push(LayerSpec::Flatten);
        for &units in &arch.hidden_units {
            layers.push(LayerSpec::Dense { units });
            layers.push(LayerSpec::Relu);
        }
        layers.push(LayerSpec::Dense {
            units: arch.classes,
        });
        let spec = ModelSpec {
            input: arch.input,
            layers,
            pooling_variant: arch.pooling,
            activation_placement: arch.placement,
        };
        spec.shape_trace()?;
        Ok(spec)
    }

    /// Per-item output shape of every layer, starting with the input.
    /// Fails if consecutive layers do not compose.
    pub fn shape_trace(&self) -> Result<Vec<Shape4>> {
        let (h, w, c) = self.input;
        let mut shape = Shape4::new(1, h, w, c)?;
        let mut trace = alloc::vec![shape];
        for layer in &self.layers {
            shape = match *layer {
                LayerSpec::Conv { filters, kernel } => {
                    Conv2d::zeros(kernel, kernel, shape.channels, filters).output_shape(shape)?
                }
                LayerSpec::Relu => shape,
                LayerSpec::NirmalPool { .. } | LayerSpec::MaxPool2x2 => {
                    let (oh, ow) = spatial_after(*layer, shape.height, shape.width)?;
                    Shape4::new(1, oh, ow, shape.channels)?
                }
                LayerSpec::Flatten => Shape4::new(1, 1, 1, shape.item_len())?,
                LayerSpec::Dense { units } => {
                    if shape.height != 1 || shape.width != 1 {
                        return Err(Error::Param(format!(
                            "dense layer needs a flattened input, got {shape}"
                        )));
                    }
                    Shape4::new(1, 1, 1, units)?
                }
            };
            trace.push(shape);
        }
        Ok(trace)
    }

    pub fn classes(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::Dense { units }) => *units,
            _ => 0,
        }
    }
}

fn spatial_after(layer: LayerSpec, h: usize, w: usize) -> Result<(usize, usize)> {
    match layer {
        LayerSpec::NirmalPool { target_h, target_w } => {
            let p = crate::pooling::compute_pool_params(h, w, target_h, target_w)?;
            Ok((p.out_h, p.out_w))
        }
        LayerSpec::MaxPool2x2 => {
            let p = crate::pooling::PoolParams::fixed(h, w, 2, 2)?;
            Ok((p.out_h, p.out_w))
        }
        _ => Ok((h, w)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(Conv2d),
    Relu,
    NirmalPool { target_h: usize, target_w: usize },
    MaxPool2x2,
    Flatten,
    Dense(Dense),
}

/// Activations retained by [`Model::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input to each layer, in order.
    pub inputs: Vec<Tensor4>,
    pub pool_caches: Vec<Option<PoolCache>>,
}

/// One gradient buffer per parameter tensor, aligned with
/// [`Model::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn as_slices(&self) -> Vec<&[f64]> {
        self.tensors.iter().map(Vec::as_slice).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub layers: Vec<Layer>,
}

impl Model {
    /// All weights and biases zero.
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        Self::with_init(spec, |_, buf| buf.fill(0.0))
    }

    /// Kaiming-normal weights (`std = sqrt(2 / fan_in)`) and zero biases,
    /// drawn from a ChaCha8 stream seeded with `seed`.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_init(spec, |fan_in, buf| {
            let std = libm::sqrt(2.0 / fan_in as f64);
            let normal = Normal::new(0.0, std).expect("finite positive std");
            for v in buf.iter_mut() {
                *v = normal.sample(&mut rng);
            }
        })
    }

    fn with_init(spec: &ModelSpec, mut fill: impl FnMut(usize, &mut [f64])) -> Result<Self> {
        let trace = spec.shape_trace()?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (k, layer) in spec.layers.iter().enumerate() {
            let in_shape = trace[k];
            layers.push(match *layer {
                LayerSpec::Conv { filters, kernel } => {
                    let mut conv = Conv2d::zeros(kernel, kernel, in_shape.channels, filters);
                    fill(conv.fan_in(), &mut conv.kernel);
                    Layer::Conv(conv)
                }
                LayerSpec::Dense { units } => {
                    let mut dense = Dense::zeros(in_shape.item_len(), units);
                    fill(dense.in_features, &mut dense.weights);
                    Layer::Dense(dense)
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::NirmalPool { target_h, target_w } => {
                    Layer::NirmalPool { target_h, target_w }
                }
                LayerSpec::MaxPool2x2 => Layer::MaxPool2x2,
                LayerSpec::Flatten => Layer::Flatten,
            });
        }
        Ok(Model {
            spec: spec.clone(),
            layers,
        })
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(c.kernel.as_slice());
                    out.push(c.bias.as_slice());
                }
                Layer::Dense(d) => {
                    out.push(d.weights.as_slice());
                    out.push(d.bias.as_slice());
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(c.kernel.as_mut_slice());
                    out.push(c.bias.as_mut_slice());
                }
                Layer::Dense(d) => {
                    out.push(d.weights.as_mut_slice());
                    out.push(d.bias.as_mut_slice());
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn check_input(&self, batch: &Tensor4) -> Result<()> {
        let s = batch.shape();
        if (s.height, s.width, s.channels) != self.spec.input {
            return Err(Error::Param(format!(
                "batch {s} does not match model input {:?}",
                self.spec.input
            )));
        }
        Ok(())
    }

    /// Logits only; nothing is retained.
    pub fn predict(&self, batch: &Tensor4) -> Result<Tensor4> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            x = apply(layer, &x)?.0;
        }
        Ok(x)
    }

    /// Logits plus the activations needed by [`backward`](Self::backward).
    pub fn forward(&self, batch: &Tensor4) -> Result<(Tensor4, Trace)> {
        self.check_input(batch)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pool_caches = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for layer in &self.layers {
            let (y, cache) = apply(layer, &x)?;
            inputs.push(x);
            pool_caches.push(cache);
            x = y;
        }
        Ok((
            x,
            Trace {
                inputs,
                pool_caches,
            },
        ))
    }

    /// Gradients of every parameter given `d loss / d logits`.
    pub fn backward(&self, trace: &Trace, grad_logits: &Tensor4) -> Result<Gradients> {
        if trace.inputs.len() != self.layers.len() {
            return Err(Error::Param("trace does not belong to this model".into()));
        }
        let mut per_layer: Vec<Option<(Vec<f64>, Vec<f64>)>> =
            (0..self.layers.len()).map(|_| None).collect();
        let mut grad = grad_logits.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.inputs[k];
            grad = match layer {
                Layer::Conv(c) => {
                    let g = c.backward(input, &grad)?;
                    per_layer[k] = Some((g.kernel, g.bias));
                    g.input
                }
                Layer::Dense(d) => {
                    let g = d.backward(input, &grad)?;
                    per_layer[k] = Some((g.weights, g.bias));
                    g.input
                }
                Layer::Relu => {
                    let mut g = grad;
                    for (gv, &xv) in g.data_mut().iter_mut().zip(input.data()) {
                        if xv <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    g
                }
                Layer::NirmalPool { .. } => {
                    let cache = trace.pool_caches[k].as_ref().ok_or_else(missing_cache)?;
                    nirmal_backward(&grad, cache, input.shape())?
                }
                Layer::MaxPool2x2 => {
                    let cache = trace.pool_caches[k].as_ref().ok_or_else(missing_cache)?;
                    max_pool2x2_backward(&grad, cache, input.shape())?
                }
                Layer::Flatten => grad.reshape(input.shape())?,
            };
        }
        let mut tensors = Vec::new();
        for (w, b) in per_layer.into_iter().flatten() {
            tensors.push(w);
            tensors.push(b);
        }
        Ok(Gradients { tensors })
    }

    /// Mean cross-entropy of `batch` against `labels`, the logits, and the
    /// parameter gradients.
    pub fn loss_and_gradients(
        &self,
        batch: &Tensor4,
        labels: &[usize],
    ) -> Result<(f64, Tensor4, Gradients)> {
        let (logits, trace) = self.forward(batch)?;
        let (loss, grad_logits) = softmax_cross_entropy(&logits, labels)?;
        let grads = self.backward(&trace, &grad_logits)?;
        Ok((loss, logits, grads))
    }
}

fn missing_cache() -> Error {
    Error::Param("pooling cache missing from trace".into())
}

fn apply(layer: &Layer, x: &Tensor4) -> Result<(Tensor4, Option<PoolCache>)> {
    Ok(match layer {
        Layer::Conv(c) => (c.forward(x)?, None),
        Layer::Dense(d) => (d.forward(x)?, None),
        Layer::Relu => (x.map(relu), None),
        Layer::NirmalPool { target_h, target_w } => {
            let (y, cache) = nirmal_forward(x, *target_h, *target_w)?;
            (y, Some(cache))
        }
        Layer::MaxPool2x2 => {
            let (y, cache) = max_pool2x2_forward(x)?;
            (y, Some(cache))
        }
        Layer::Flatten => (x.clone().flatten(), None),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(h: usize, w: usize, c: usize) -> Shape4 {
        Shape4::new(1, h, w, c).unwrap()
    }

    #[test]
    fn reference_shape_trace_mnist() {
        for (pooling, placement) in [
            (PoolingVariant::Nirmal, ActivationPlacement::PoolOnly),
            (PoolingVariant::Max2x2, ActivationPlacement::AfterConv),
        ] {
            let spec = ModelSpec::build(&Architecture::reference((28, 28, 1), pooling, placement))
                .unwrap();
            let trace: Vec<Shape4> = spec
                .shape_trace()
                .unwrap()
                .into_iter()
                .zip(&spec.layers_with_input())
                .filter(|(_, keep)| **keep)
                .map(|(s, _)| s)
                .collect();
            assert_eq!(
                trace,
                alloc::vec![
                    item(28, 28, 1),
                    item(26, 26, 32),
                    item(13, 13, 32),
                    item(11, 11, 64),
                    item(5, 5, 64),
                    item(1, 1, 1600),
                    item(1, 1, 128),
                    item(1, 1, 10),
                ]
            );
        }
    }

    impl ModelSpec {
        // Drops the shapes emitted by ReLU layers so traces compare across
        // activation placements.
        fn layers_with_input(&self) -> Vec<bool> {
            core::iter::once(true)
                .chain(self.layers.iter().map(|l| *l != LayerSpec::Relu))
                .collect()
        }
    }

    #[test]
    fn default_targets_halve() {
        let spec = ModelSpec::build(&Architecture::reference(
            (32, 32, 3),
            PoolingVariant::Nirmal,
            ActivationPlacement::PoolOnly,
        ))
        .unwrap();
        let targets: Vec<_> = spec
            .layers
            .iter()
            .filter_map(|l| match l {
                LayerSpec::NirmalPool { target_h, target_w } => Some((*target_h, *target_w)),
                _ => None,
            })
            .collect();
        assert_eq!(targets, alloc::vec![(15, 15), (6, 6)]);
        assert_eq!(spec.shape_trace().unwrap().last().unwrap().channels, 10);
    }

    #[test]
    fn layer_orders() {
        let arch = Architecture::reference(
            (28, 28, 1),
            PoolingVariant::Max2x2,
            ActivationPlacement::AfterConv,
        );
        let spec = ModelSpec::build(&arch).unwrap();
        assert_eq!(
            spec.layers,
            alloc::vec![
                LayerSpec::Conv {
                    filters: 32,
                    kernel: 3
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool2x2,
                LayerSpec::Conv {
                    filters: 64,
                    kernel: 3
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool2x2,
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 128 },
                LayerSpec::Relu,
                LayerSpec::Dense { units: 10 },
            ]
        );
        let single = Architecture {
            layout: PoolLayout::Single,
            placement: ActivationPlacement::PoolOnly,
            ..arch
        };
        let spec = ModelSpec::build(&single).unwrap();
        assert_eq!(
            spec.layers[..3],
            [
                LayerSpec::Conv {
                    filters: 32,
                    kernel: 3
                },
                LayerSpec::Conv {
                    filters: 64,
                    kernel: 3
                },
                LayerSpec::MaxPool2x2,
            ]
        );
        // 28 → 26 → 24 → 12
        assert_eq!(spec.shape_trace().unwrap()[4], item(1, 1, 12 * 12 * 64));
    }

    #[test]
    fn too_small_input_rejected() {
        let arch = Architecture::reference(
            (8, 8, 1),
            PoolingVariant::Max2x2,
            ActivationPlacement::AfterConv,
        );
        assert!(ModelSpec::build(&arch).is_err());
    }

    #[test]
    fn zero_model_gives_uniform_logits() {
        let spec = ModelSpec::build(&Architecture::reference(
            (28, 28, 1),
            PoolingVariant::Nirmal,
            ActivationPlacement::PoolOnly,
        ))
        .unwrap();
        let model = Model::zeros(&spec).unwrap();
        let x = Tensor4::from_fn(Shape4::new(2, 28, 28, 1).unwrap(), |b, h, w, _| {
            ((b + h * w) % 7) as f64 / 7.0
        });
        let (loss, logits, _) = model.loss_and_gradients(&x, &[3, 9]).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));
        assert!((loss - core::f64::consts::LN_10).abs() < 1e-12);
    }

    #[test]
    fn init_is_seeded() {
        let spec = ModelSpec::build(&Architecture::reference(
            (28, 28, 1),
            PoolingVariant::Max2x2,
            ActivationPlacement::AfterConv,
        ))
        .unwrap();
        let a = Model::init(&spec, 7).unwrap();
        let b = Model::init(&spec, 7).unwrap();
        let c = Model::init(&spec, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(
            a.param_count(),
            3 * 3 * 32 + 32 + 3 * 3 * 32 * 64 + 64 + 1600 * 128 + 128 + 1280 + 10
        );
        // biases start at zero
        assert!(a.params()[1].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_input_rejected() {
        let spec = ModelSpec::build(&Architecture::reference(
            (28, 28, 1),
            PoolingVariant::Max2x2,
            ActivationPlacement::AfterConv,
        ))
        .unwrap();
        let model = Model::zeros(&spec).unwrap();
        assert!(model
            .predict(&Tensor4::zeros(Shape4::new(1, 32, 32, 3).unwrap()))
            .is_err());
    }
}
