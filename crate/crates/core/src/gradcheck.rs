//! Central finite-difference checks for every backward pass.
//!
//! Each check draws random small instances, differentiates a scalar
//! objective numerically with step [`PERTURBATION`], and compares against
//! the analytic gradient. Pooling and ReLU are piecewise linear, so
//! instances whose windows have near-ties or near-zero maxima (closer than
//! [`KINK_MARGIN`]) are redrawn rather than checked.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{
    softmax_cross_entropy, ActivationPlacement, Architecture, Conv2d, Dense, Layer, Model,
    ModelSpec, PoolLayout, PoolingVariant, Trace,
};
use crate::pooling::{
    compute_pool_params, max_pool2x2_backward, max_pool2x2_forward, nirmal_backward,
    nirmal_forward, PoolParams,
};
use crate::tensor::{Shape4, Tensor4};

pub const PERTURBATION: f64 = 1e-5;
pub const KINK_MARGIN: f64 = 1e-4;
/// Gradients smaller than this are compared on an absolute scale.
pub const SCALE_FLOOR: f64 = 1e-3;

const MAX_ATTEMPTS: usize = 10_000;

/// `|a − n| / max(|a|, |n|, SCALE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(SCALE_FLOOR);
    (analytic - numeric).abs() / scale
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h` for every coordinate `i`.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Smallest distance, over all windows, between the maximum and the
/// runner-up, and (when `fused`) between the maximum and zero.
pub fn pool_margin(input: &Tensor4, params: &PoolParams, fused: bool) -> f64 {
    let s = input.shape();
    let x = input.data();
    let mut margin = f64::INFINITY;
    for b in 0..s.batch {
        for c in 0..s.channels {
            for i in 0..params.out_h {
                for j in 0..params.out_w {
                    let mut best = f64::NEG_INFINITY;
                    let mut second = f64::NEG_INFINITY;
                    for row in i * params.stride_h..i * params.stride_h + params.window_h {
                        for col in j * params.stride_w..j * params.stride_w + params.window_w {
                            let v = x[s.offset(b, row, col, c)];
                            if v > best {
                                second = best;
                                best = v;
                            } else if v > second {
                                second = v;
                            }
                        }
                    }
                    margin = margin.min(best - second);
                    if fused {
                        margin = margin.min(best.abs());
                    }
                }
            }
        }
    }
    margin
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    /// Number of gradient coordinates compared.
    pub checked: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Hook applied to each analytic gradient before comparison. Used to prove
/// that a broken backward pass is detected.
pub type Tamper<'a> = &'a mut dyn FnMut(&'static str, &mut [f64]);

pub const CHECK_NAMES: [&str; 7] = [
    "nirmal_backward",
    "max_pool2x2_backward",
    "conv2d_backward",
    "dense_backward",
    "softmax_cross_entropy",
    "end_to_end_nirmal",
    "end_to_end_max2x2",
];

/// Runs every check with default instance counts.
pub fn run_suite(seed: u64, tolerance: f64) -> Result<Vec<CheckResult>> {
    run_suite_with(seed, tolerance, &mut |_, _| {})
}

pub fn run_suite_with(seed: u64, tolerance: f64, tamper: Tamper<'_>) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();
    let mut record = |name: &'static str, errors: (usize, f64)| {
        results.push(CheckResult {
            name,
            checked: errors.0,
            max_rel_error: errors.1,
            passed: errors.1 < tolerance,
        });
    };
    record(CHECK_NAMES[0], check_nirmal(&mut rng, 100, tamper)?);
    record(CHECK_NAMES[1], check_max_pool2x2(&mut rng, 100, tamper)?);
    record(CHECK_NAMES[2], check_conv2d(&mut rng, 20, tamper)?);
    record(CHECK_NAMES[3], check_dense(&mut rng, 20, tamper)?);
    record(CHECK_NAMES[4], check_softmax(&mut rng, 20, tamper)?);
    record(
        CHECK_NAMES[5],
        check_end_to_end(&mut rng, PoolingVariant::Nirmal, 3, tamper)?,
    );
    record(
        CHECK_NAMES[6],
        check_end_to_end(&mut rng, PoolingVariant::Max2x2, 3, tamper)?,
    );
    Ok(results)
}

fn uniform_tensor(rng: &mut ChaCha8Rng, shape: Shape4, scale: f64) -> Tensor4 {
    Tensor4::from_fn(shape, |_, _, _, _| rng.random_range(-scale..scale))
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn exhausted() -> Error {
    Error::Param("could not draw a kink-free gradient-check instance".into())
}

fn compare(
    name: &'static str,
    mut analytic: Vec<f64>,
    numeric: &[f64],
    tamper: Tamper<'_>,
    acc: &mut (usize, f64),
) {
    tamper(name, &mut analytic);
    acc.0 += analytic.len();
    acc.1 = acc.1.max(max_relative_error(&analytic, numeric));
}

/// Adaptive pooling with fused ReLU, objective `Σ r · out` with random `r`.
pub fn check_nirmal(
    rng: &mut ChaCha8Rng,
    instances: usize,
    tamper: Tamper<'_>,
) -> Result<(usize, f64)> {
    let mut acc = (0, 0.0);
    let mut done = 0;
    for _ in 0..MAX_ATTEMPTS {
        if done == instances {
            break;
        }
        let shape = Shape4::new(
            rng.random_range(1..=2),
            rng.random_range(1..=6),
            rng.random_range(1..=6),
            rng.random_range(1..=3),
        )?;
        let (th, tw) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let input = uniform_tensor(rng, shape, 1.0);
        let params = compute_pool_params(shape.height, shape.width, th, tw)?;
        if pool_margin(&input, &params, true) < KINK_MARGIN {
            continue;
        }
        let (out, cache) = nirmal_forward(&input, th, tw)?;
        let weights = uniform_vec(rng, out.data().len(), 1.0);
        let grad_out = Tensor4::from_vec(out.shape(), weights.clone())?;
        let analytic = nirmal_backward(&grad_out, &cache, shape)?.into_data();
        let numeric = central_difference(
            |x| {
                let t = Tensor4::from_vec(shape, x.to_vec()).expect("shape");
                dot(
                    nirmal_forward(&t, th, tw).expect("forward").0.data(),
                    &weights,
                )
            },
            input.data(),
            PERTURBATION,
        );
        compare(CHECK_NAMES[0], analytic, &numeric, tamper, &mut acc);
        done += 1;
    }
    if done < instances {
        return Err(exhausted());
    }
    Ok(acc)
}

pub fn check_max_pool2x2(
    rng: &mut ChaCha8Rng,
    instances: usize,
    tamper: Tamper<'_>,
) -> Result<(usize, f64)> {
    let mut acc = (0, 0.0);
    let mut done = 0;
    for _ in 0..MAX_ATTEMPTS {
        if done == instances {
            break;
        }
        let shape = Shape4::new(
            rng.random_range(1..=2),
            rng.random_range(2..=6),
            rng.random_range(2..=6),
            rng.random_range(1..=3),
        )?;
        let input = uniform_tensor(rng, shape, 1.0);
        let params = PoolParams::fixed(shape.height, shape.width, 2, 2)?;
        if pool_margin(&input, &params, false) < KINK_MARGIN {
            continue;
        }
        let (out, cache) = max_pool2x2_forward(&input)?;
        let weights = uniform_vec(rng, out.data().len(), 1.0);
        let grad_out = Tensor4::from_vec(out.shape(), weights.clone())?;
        let analytic = max_pool2x2_backward(&grad_out, &cache, shape)?.into_data();
        let numeric = central_difference(
            |x| {
                let t = Tensor4::from_vec(shape, x.to_vec()).expect("shape");
                dot(max_pool2x2_forward(&t).expect("forward").0.data(), &weights)
            },
            input.data(),
            PERTURBATION,
        );
        compare(CHECK_NAMES[1], analytic, &numeric, tamper, &mut acc);
        done += 1;
    }
    if done < instances {
        return Err(exhausted());
    }
    Ok(acc)
}

/// Input, kernel and bias gradients of a random convolution.
pub fn check_conv2d(
    rng: &mut ChaCha8Rng,
    instances: usize,
    tamper: Tamper<'_>,
) -> Result<(usize, f64)> {
    let mut acc = (0, 0.0);
    for _ in 0..instances {
        let k = rng.random_range(1..=3);
        let (in_ch, out_ch) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let shape = Shape4::new(
            rng.random_range(1..=2),
            rng.random_range(k..=6),
            rng.random_range(k..=6),
            in_ch,
        )?;
        let input = uniform_tensor(rng, shape, 1.0);
        let layer = Conv2d::from_parts(
            k,
            k,
            in_ch,
            out_ch,
            uniform_vec(rng, k * k * in_ch * out_ch, 1.0),
            uniform_vec(rng, out_ch, 1.0),
        )?;
        let out_shape = layer.output_shape(shape)?;
        let weights = uniform_vec(rng, out_shape.len(), 1.0);
        let grads = layer.backward(&input, &Tensor4::from_vec(out_shape, weights.clone())?)?;

        let objective =
            |x: &Tensor4, l: &Conv2d| dot(l.forward(x).expect("forward").data(), &weights);
        let num_input = central_difference(
            |x| {
                objective(
                    &Tensor4::from_vec(shape, x.to_vec()).expect("shape"),
                    &layer,
                )
            },
            input.data(),
            PERTURBATION,
        );
        let num_kernel = central_difference(
            |w| {
                let mut l = layer.clone();
                l.kernel.copy_from_slice(w);
                objective(&input, &l)
            },
            &layer.kernel,
            PERTURBATION,
        );
        let num_bias = central_difference(
            |b| {
                let mut l = layer.clone();
                l.bias.copy_from_slice(b);
                objective(&input, &l)
            },
            &layer.bias,
            PERTURBATION,
        );
        compare(
            CHECK_NAMES[2],
            grads.input.into_data(),
            &num_input,
            tamper,
            &mut acc,
        );
        compare(CHECK_NAMES[2], grads.kernel, &num_kernel, tamper, &mut acc);
        compare(CHECK_NAMES[2], grads.bias, &num_bias, tamper, &mut acc);
    }
    Ok(acc)
}

/// Input, weight and bias gradients of a random 4 → 6 affine map.
pub fn check_dense(
    rng: &mut ChaCha8Rng,
    instances: usize,
    tamper: Tamper<'_>,
) -> Result<(usize, f64)> {
    let mut acc = (0, 0.0);
    let (fin, fout) = (4, 6);
    for _ in 0..instances {
        let shape = Shape4::new(rng.random_range(1..=3), 1, 1, fin)?;
        let input = uniform_tensor(rng, shape, 1.0);
        let layer = Dense::from_parts(
            fin,
            fout,
            uniform_vec(rng, fin * fout, 1.0),
            uniform_vec(rng, fout, 1.0),
        )?;
        let weights = uniform_vec(rng, shape.batch * fout, 1.0);
        let grad_out = Tensor4::from_vec(Shape4::new(shape.batch, 1, 1, fout)?, weights.clone())?;
        let grads = layer.backward(&input, &grad_out)?;

        let objective =
            |x: &Tensor4, l: &Dense| dot(l.forward(x).expect("forward").data(), &weights);
        let num_input = central_difference(
            |x| {
                objective(
                    &Tensor4::from_vec(shape, x.to_vec()).expect("shape"),
                    &layer,
                )
            },
            input.data(),
            PERTURBATION,
        );
        let num_weights = central_difference(
            |w| {
                let mut l = layer.clone();
                l.weights.copy_from_slice(w);
                objective(&input, &l)
            },
            &layer.weights,
            PERTURBATION,
        );
        let num_bias = central_difference(
            |b| {
                let mut l = layer.clone();
                l.bias.copy_from_slice(b);
                objective(&input, &l)
            },
            &layer.bias,
            PERTURBATION,
        );
        compare(
            CHECK_NAMES[3],
            grads.input.into_data(),
            &num_input,
            tamper,
            &mut acc,
        );
        compare(
            CHECK_NAMES[3],
            grads.weights,
            &num_weights,
            tamper,
            &mut acc,
        );
        compare(CHECK_NAMES[3], grads.bias, &num_bias, tamper, &mut acc);
    }
    Ok(acc)
}

pub fn check_softmax(
    rng: &mut ChaCha8Rng,
    instances: usize,
    tamper: Tamper<'_>,
) -> Result<(usize, f64)> {
    let mut acc = (0, 0.0);
    for _ in 0..instances {
        let batch = rng.random_range(1..=4);
        let shape = Shape4::new(batch, 1, 1, 10)?;
        let logits = uniform_tensor(rng, shape, 3.0);
        let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..10)).collect();
        let (_, grad) = softmax_cross_entropy(&logits, &labels)?;
        let numeric = central_difference(
            |z| {
                let t = Tensor4::from_vec(shape, z.to_vec()).expect("shape");
                softmax_cross_entropy(&t, &labels).expect("loss").0
            },
            logits.data(),
            PERTURBATION,
        );
        compare(CHECK_NAMES[4], grad.into_data(), &numeric, tamper, &mut acc);
    }
    Ok(acc)
}

/// Toy network on 8×8×1 inputs with a 2-class head.
pub fn toy_spec(variant: PoolingVariant) -> Result<ModelSpec> {
    let (placement, layout) = match variant {
        PoolingVariant::Nirmal => (ActivationPlacement::PoolOnly, PoolLayout::Interleaved),
        PoolingVariant::Max2x2 => (ActivationPlacement::AfterConv, PoolLayout::Single),
    };
    ModelSpec::build(&Architecture {
        input: (8, 8, 1),
        conv_filters: vec![2, 3],
        kernel: 3,
        hidden_units: vec![4],
        classes: 2,
        pooling: variant,
        placement,
        layout,
        pool_targets: Vec::new(),
    })
}

/// Smallest distance of any ReLU input or pooling window from a kink.
pub fn trace_margin(model: &Model, trace: &Trace) -> f64 {
    let mut margin = f64::INFINITY;
    for (k, layer) in model.layers.iter().enumerate() {
        let input = &trace.inputs[k];
        match layer {
            Layer::Relu => {
                margin = input.data().iter().fold(margin, |m, v| m.min(v.abs()));
            }
            Layer::NirmalPool { .. } | Layer::MaxPool2x2 => {
                if let Some(cache) = &trace.pool_caches[k] {
                    let fused = matches!(layer, Layer::NirmalPool { .. });
                    margin = margin.min(pool_margin(input, &cache.params, fused));
                }
            }
            _ => {}
        }
    }
    margin
}

/// Every parameter of a freshly initialised toy model against finite
/// differences of the batch loss.
pub fn check_end_to_end(
    rng: &mut ChaCha8Rng,
    variant: PoolingVariant,
    instances: usize,
    tamper: Tamper<'_>,
) -> Result<(usize, f64)> {
    let name = match variant {
        PoolingVariant::Nirmal => CHECK_NAMES[5],
        PoolingVariant::Max2x2 => CHECK_NAMES[6],
    };
    let spec = toy_spec(variant)?;
    let mut acc = (0, 0.0);
    let mut done = 0;
    for _ in 0..MAX_ATTEMPTS {
        if done == instances {
            break;
        }
        let model = Model::init(&spec, rng.random())?;
        let batch = uniform_tensor(rng, Shape4::new(3, 8, 8, 1)?, 1.0);
        let labels: Vec<usize> = (0..3).map(|_| rng.random_range(0..2)).collect();
        let (logits, trace) = model.forward(&batch)?;
        // parameter perturbations move activations further than input ones
        if trace_margin(&model, &trace) < 10.0 * KINK_MARGIN {
            continue;
        }
        let (_, grad_logits) = softmax_cross_entropy(&logits, &labels)?;
        let grads = model.backward(&trace, &grad_logits)?;
        for (t, analytic) in grads.tensors.into_iter().enumerate() {
            let base = model.params()[t].to_vec();
            let numeric = central_difference(
                |p| {
                    let mut m = model.clone();
                    m.params_mut()[t].copy_from_slice(p);
                    let z = m.predict(&batch).expect("forward");
                    softmax_cross_entropy(&z, &labels).expect("loss").0
                },
                &base,
                PERTURBATION,
            );
            compare(name, analytic, &numeric, tamper, &mut acc);
        }
        done += 1;
    }
    if done < instances {
        return Err(exhausted());
    }
    Ok(acc)
}
