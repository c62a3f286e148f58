//! Adaptive max pooling with fused ReLU ("NIRMAL" pooling) and a fixed
//! 2×2 max-pooling baseline.
//!
//! The operator takes an input feature map of shape `(B, H_in, W_in, C)` and
//! a requested spatial size `(H_t, W_t)`, and:
//!
//! 1. derives window sizes `P = ceil(in / target)` and strides
//!    `S = max(1, floor(in / target))` per axis ([`compute_pool_params`]);
//! 2. takes the maximum of every channel over each window
//!    `[i·S_h, i·S_h + P_h) × [j·S_w, j·S_w + P_w)` that fits entirely
//!    inside the input, giving `floor((in − P) / S) + 1` outputs per axis
//!    ([`max_pool_forward`]);
//! 3. clamps the result with `max(0, ·)` ([`nirmal_forward`]).
//!
//! The achieved output size can differ slightly from the requested one when
//! the target does not divide the input (28 → 10 gives 13, for example), and
//! a target larger than the input degenerates to a 1×1 window with stride 1.
//! No padding is ever applied; rows and columns not covered by a window are
//! dropped.
//!
//! Backward passes route each output gradient to the input coordinate that
//! supplied the window maximum. Ties go to the first coordinate in row-major
//! window order, and the fused ReLU passes gradient only where the pooled
//! maximum was strictly positive. Overlapping windows (`P > S`) accumulate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{relu, Shape4, Tensor4};

/// Window, stride and output extents for one pooling application over an
/// `in_h × in_w` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PoolParams {
    pub in_h: usize,
    pub in_w: usize,
    pub window_h: usize,
    pub window_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl PoolParams {
    /// Fixed window/stride pooling, e.g. the 2×2 baseline.
    pub fn fixed(in_h: usize, in_w: usize, window: usize, stride: usize) -> Result<Self> {
        if window == 0 || stride == 0 {
            return Err(Error::Param(format!(
                "window {window} and stride {stride} must be at least 1"
            )));
        }
        Ok(PoolParams {
            in_h,
            in_w,
            window_h: window,
            window_w: window,
            stride_h: stride,
            stride_w: stride,
            out_h: output_shape(in_h, window, stride)?,
            out_w: output_shape(in_w, window, stride)?,
        })
    }

    /// Output shape for an input with the given batch and channel counts.
    pub fn output_shape(&self, batch: usize, channels: usize) -> Result<Shape4> {
        Shape4::new(batch, self.out_h, self.out_w, channels)
    }

    /// True when neighbouring windows share input cells.
    pub fn overlapping(&self) -> bool {
        self.window_h > self.stride_h || self.window_w > self.stride_w
    }
}

/// Number of window placements along one axis: `floor((in − p) / s) + 1`.
pub fn output_shape(in_len: usize, window: usize, stride: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::Param("stride must be at least 1".into()));
    }
    if window == 0 || window > in_len {
        return Err(Error::Param(format!(
            "window {window} does not fit input extent {in_len}"
        )));
    }
    Ok((in_len - window) / stride + 1)
}

/// Adaptive window and stride for mapping `h_in × w_in` toward
/// `h_target × w_target`.
///
/// Targets larger than the input are accepted: the stride guard yields a
/// 1×1 window with stride 1 and the output keeps the input size.
pub fn compute_pool_params(
    h_in: usize,
    w_in: usize,
    h_target: usize,
    w_target: usize,
) -> Result<PoolParams> {
    if h_in == 0 || w_in == 0 || h_target == 0 || w_target == 0 {
        return Err(Error::Param(format!(
            "pooling extents must be at least 1, got input {h_in}x{w_in} target {h_target}x{w_target}"
        )));
    }
    let (window_h, stride_h) = adaptive_axis(h_in, h_target);
    let (window_w, stride_w) = adaptive_axis(w_in, w_target);
    Ok(PoolParams {
        in_h: h_in,
        in_w: w_in,
        window_h,
        window_w,
        stride_h,
        stride_w,
        out_h: output_shape(h_in, window_h, stride_h)?,
        out_w: output_shape(w_in, window_w, stride_w)?,
    })
}

fn adaptive_axis(in_len: usize, target: usize) -> (usize, usize) {
    let window = in_len.div_ceil(target);
    let stride = (in_len / target).max(1);
    (window, stride)
}

/// Backward-pass bookkeeping for one pooling application.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolCache {
    pub params: PoolParams,
    pub input_shape: Shape4,
    /// Flat input offset that supplied each output element's maximum.
    pub argmax: Vec<usize>,
    /// Whether the fused activation passed each output element. All `true`
    /// for plain max pooling.
    pub relu_mask: Vec<bool>,
}

impl PoolCache {
    pub fn output_shape(&self) -> Shape4 {
        Shape4 {
            batch: self.input_shape.batch,
            height: self.params.out_h,
            width: self.params.out_w,
            channels: self.input_shape.channels,
        }
    }
}

/// Max over every valid window, recording the winning coordinate.
pub fn max_pool_forward(input: &Tensor4, params: &PoolParams) -> Result<(Tensor4, PoolCache)> {
    let s = input.shape();
    if s.height != params.in_h || s.width != params.in_w {
        return Err(Error::Param(format!(
            "input {s} does not match pooling parameters for {}x{}",
            params.in_h, params.in_w
        )));
    }
    if params.window_h > s.height
        || params.window_w > s.width
        || params.stride_h == 0
        || params.stride_w == 0
        || output_shape(s.height, params.window_h, params.stride_h)? != params.out_h
        || output_shape(s.width, params.window_w, params.stride_w)? != params.out_w
    {
        return Err(Error::Param(format!(
            "inconsistent pooling parameters {params:?}"
        )));
    }

    let out_shape = params.output_shape(s.batch, s.channels)?;
    let channels = s.channels;
    let x = input.data();
    let mut out = vec![0.0; out_shape.len()];
    let mut argmax = vec![0usize; out_shape.len()];

    for b in 0..s.batch {
        for i in 0..params.out_h {
            for j in 0..params.out_w {
                let o = out_shape.offset(b, i, j, 0);
                let best = &mut out[o..o + channels];
                let arg = &mut argmax[o..o + channels];
                let (row0, col0) = (i * params.stride_h, j * params.stride_w);

                let first = s.offset(b, row0, col0, 0);
                best.copy_from_slice(&x[first..first + channels]);
                for (c, a) in arg.iter_mut().enumerate() {
                    *a = first + c;
                }
                // Strict comparison in row-major order keeps the first winner.
                for row in row0..row0 + params.window_h {
                    for col in col0..col0 + params.window_w {
                        let base = s.offset(b, row, col, 0);
                        let cell = &x[base..base + channels];
                        for c in 0..channels {
                            if cell[c] > best[c] {
                                best[c] = cell[c];
                                arg[c] = base + c;
                            }
                        }
                    }
                }
            }
        }
    }

    let relu_mask = vec![true; out.len()];
    let cache = PoolCache {
        params: *params,
        input_shape: s,
        argmax,
        relu_mask,
    };
    Ok((Tensor4::from_vec(out_shape, out)?, cache))
}

/// Adaptive max pooling toward `h_target × w_target` followed by ReLU.
pub fn nirmal_forward(
    input: &Tensor4,
    h_target: usize,
    w_target: usize,
) -> Result<(Tensor4, PoolCache)> {
    let s = input.shape();
    let params = compute_pool_params(s.height, s.width, h_target, w_target)?;
    let (mut pooled, mut cache) = max_pool_forward(input, &params)?;
    for (v, pass) in pooled.data_mut().iter_mut().zip(cache.relu_mask.iter_mut()) {
        *pass = *v > 0.0;
        *v = relu(*v);
    }
    Ok((pooled, cache))
}

fn check_backward_shapes(grad_out: &Tensor4, cache: &PoolCache, input_shape: Shape4) -> Result<()> {
    if grad_out.shape() != cache.output_shape() {
        return Err(Error::Param(format!(
            "gradient shape {} does not match pooled shape {}",
            grad_out.shape(),
            cache.output_shape()
        )));
    }
    if input_shape != cache.input_shape {
        return Err(Error::Param(format!(
            "input shape {input_shape} does not match cached shape {}",
            cache.input_shape
        )));
    }
    Ok(())
}

fn route(grad_out: &Tensor4, cache: &PoolCache, masked: bool) -> Tensor4 {
    let mut grad_in = Tensor4::zeros(cache.input_shape);
    let gi = grad_in.data_mut();
    for (k, (&g, &src)) in grad_out.data().iter().zip(&cache.argmax).enumerate() {
        if !masked || cache.relu_mask[k] {
            gi[src] += g;
        }
    }
    grad_in
}

/// Gradient of [`nirmal_forward`] with respect to its input.
pub fn nirmal_backward(
    grad_out: &Tensor4,
    cache: &PoolCache,
    input_shape: Shape4,
) -> Result<Tensor4> {
    check_backward_shapes(grad_out, cache, input_shape)?;
    Ok(route(grad_out, cache, true))
}

/// Fixed 2×2, stride-2 max pooling without activation. Odd trailing rows and
/// columns are dropped.
pub fn max_pool2x2_forward(input: &Tensor4) -> Result<(Tensor4, PoolCache)> {
    let s = input.shape();
    let params = PoolParams::fixed(s.height, s.width, 2, 2)?;
    max_pool_forward(input, &params)
}

/// Routes each gradient to its window's argmax, ignoring any activation mask.
pub fn max_pool2x2_backward(
    grad_out: &Tensor4,
    cache: &PoolCache,
    input_shape: Shape4,
) -> Result<Tensor4> {
    check_backward_shapes(grad_out, cache, input_shape)?;
    Ok(route(grad_out, cache, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(rows: &[&[f64]]) -> Tensor4 {
        let h = rows.len();
        let w = rows[0].len();
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Tensor4::from_vec(Shape4::new(1, h, w, 1).unwrap(), data).unwrap()
    }

    const SAMPLE: [&[f64]; 4] = [
        &[1.0, 2.0, 3.0, 4.0],
        &[5.0, 6.0, 7.0, 8.0],
        &[-1.0, -2.0, -3.0, -4.0],
        &[0.0, 1.0, 2.0, 3.0],
    ];

    #[test]
    fn worked_parameter_cases() {
        let p = compute_pool_params(28, 28, 14, 14).unwrap();
        assert_eq!(
            (p.window_h, p.window_w, p.stride_h, p.stride_w),
            (2, 2, 2, 2)
        );
        assert_eq!((p.out_h, p.out_w), (14, 14));

        let p = compute_pool_params(28, 28, 10, 10).unwrap();
        assert_eq!((p.window_h, p.stride_h, p.out_h), (3, 2, 13));
        assert!(p.overlapping());

        let p = compute_pool_params(4, 4, 8, 8).unwrap();
        assert_eq!((p.window_h, p.stride_h, p.out_h), (1, 1, 4));
        assert_eq!((p.window_w, p.stride_w, p.out_w), (1, 1, 4));
    }

    #[test]
    fn zero_extents_rejected() {
        assert!(matches!(
            compute_pool_params(0, 4, 2, 2),
            Err(Error::Param(_))
        ));
        assert!(matches!(
            compute_pool_params(4, 4, 2, 0),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn output_shape_cases() {
        assert_eq!(output_shape(28, 2, 2).unwrap(), 14);
        assert_eq!(output_shape(28, 3, 2).unwrap(), 13);
        assert_eq!(output_shape(5, 5, 1).unwrap(), 1);
        assert!(matches!(output_shape(4, 5, 1), Err(Error::Param(_))));
        assert!(matches!(output_shape(4, 2, 0), Err(Error::Param(_))));
    }

    #[test]
    fn max_pool_sample_plane() {
        let params = PoolParams::fixed(4, 4, 2, 2).unwrap();
        let (out, cache) = max_pool_forward(&plane(&SAMPLE), &params).unwrap();
        assert_eq!(out.data(), &[6.0, 8.0, 1.0, 3.0]);
        // argmax offsets in the 4×4 plane
        assert_eq!(cache.argmax, vec![5, 7, 13, 15]);
    }

    #[test]
    fn constant_and_global_windows() {
        let t = Tensor4::filled(Shape4::new(2, 5, 7, 3).unwrap(), -2.5);
        let params = compute_pool_params(5, 7, 2, 3).unwrap();
        let (out, _) = max_pool_forward(&t, &params).unwrap();
        assert!(out.data().iter().all(|&v| v == -2.5));

        let t = plane(&SAMPLE);
        let params = PoolParams::fixed(4, 4, 4, 1).unwrap();
        let (out, _) = max_pool_forward(&t, &params).unwrap();
        assert_eq!(out.data(), &[8.0]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let params = PoolParams::fixed(4, 4, 2, 2).unwrap();
        let t = Tensor4::zeros(Shape4::new(1, 5, 4, 1).unwrap());
        assert!(matches!(
            max_pool_forward(&t, &params),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn ties_pick_first_coordinate() {
        let t = plane(&[&[3.0, 3.0], &[3.0, 3.0]]);
        let (_, cache) = nirmal_forward(&t, 1, 1).unwrap();
        assert_eq!(cache.argmax, vec![0]);
    }

    #[test]
    fn nirmal_examples() {
        let (out, cache) = nirmal_forward(&plane(&[&[-5.0, -5.0], &[-5.0, -5.0]]), 1, 1).unwrap();
        assert_eq!(out.data(), &[0.0]);
        assert_eq!(cache.relu_mask, vec![false]);

        let (out, cache) = nirmal_forward(&plane(&SAMPLE), 2, 2).unwrap();
        assert_eq!(out.data(), &[6.0, 8.0, 1.0, 3.0]);
        assert!(cache.relu_mask.iter().all(|&m| m));
    }

    #[test]
    fn nirmal_backward_routes_to_argmax() {
        let input = plane(&SAMPLE);
        let (out, cache) = nirmal_forward(&input, 2, 2).unwrap();
        let ones = Tensor4::filled(out.shape(), 1.0);
        let g = nirmal_backward(&ones, &cache, input.shape()).unwrap();
        let mut expected = [0.0; 16];
        for k in [5, 7, 13, 15] {
            expected[k] = 1.0;
        }
        assert_eq!(g.data(), &expected[..]);
    }

    #[test]
    fn nirmal_backward_masks_nonpositive_max() {
        let input = plane(&[&[-1.0, 2.0], &[0.0, 0.0]]);
        let (_, cache) = nirmal_forward(&input, 2, 1).unwrap();
        assert_eq!(cache.relu_mask, vec![true, false]);
        let grad = Tensor4::from_vec(cache.output_shape(), vec![3.0, 5.0]).unwrap();
        let g = nirmal_backward(&grad, &cache, input.shape()).unwrap();
        assert_eq!(g.data(), &[0.0, 3.0, 0.0, 0.0]);
    }

    #[test]
    fn overlapping_windows_accumulate() {
        // 3 wide, target 2: window 2 stride 1, centre column shared
        let input = plane(&[&[0.0, 9.0, 1.0]]);
        let (out, cache) = nirmal_forward(&input, 1, 2).unwrap();
        assert_eq!(out.data(), &[9.0, 9.0]);
        let grad = Tensor4::from_vec(cache.output_shape(), vec![0.5, 0.25]).unwrap();
        let g = nirmal_backward(&grad, &cache, input.shape()).unwrap();
        assert_eq!(g.data(), &[0.0, 0.75, 0.0]);
    }

    #[test]
    fn backward_shape_mismatch_rejected() {
        let input = plane(&SAMPLE);
        let (_, cache) = nirmal_forward(&input, 2, 2).unwrap();
        let bad = Tensor4::zeros(Shape4::new(1, 3, 2, 1).unwrap());
        assert!(matches!(
            nirmal_backward(&bad, &cache, input.shape()),
            Err(Error::Param(_))
        ));
        let grad = Tensor4::zeros(cache.output_shape());
        let wrong_input = Shape4::new(2, 4, 4, 1).unwrap();
        assert!(matches!(
            max_pool2x2_backward(&grad, &cache, wrong_input),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn max_pool2x2_examples() {
        let (out, _) = max_pool2x2_forward(&plane(&SAMPLE)).unwrap();
        assert_eq!(out.data(), &[6.0, 8.0, 1.0, 3.0]);

        let neg = plane(&[&[-5.0, -5.0], &[-5.0, -5.0]]);
        let (out, cache) = max_pool2x2_forward(&neg).unwrap();
        assert_eq!(out.data(), &[-5.0]);
        let grad = Tensor4::filled(out.shape(), 2.0);
        let g = max_pool2x2_backward(&grad, &cache, neg.shape()).unwrap();
        assert_eq!(g.data(), &[2.0, 0.0, 0.0, 0.0]);

        let t = Tensor4::zeros(Shape4::new(1, 5, 5, 2).unwrap());
        let (out, _) = max_pool2x2_forward(&t).unwrap();
        assert_eq!(out.shape(), Shape4::new(1, 2, 2, 2).unwrap());

        let tiny = Tensor4::zeros(Shape4::new(1, 1, 4, 1).unwrap());
        assert!(max_pool2x2_forward(&tiny).is_err());
    }
}
