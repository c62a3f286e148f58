//! Brute-force reference implementations for tests. Deliberately written
//! without reusing any library pooling or convolution code.
#![allow(dead_code)]

use nirmal_core::{Shape4, Tensor4};

/// Window and stride via floating-point ceil/floor.
pub fn window_and_stride(in_len: usize, target: usize) -> (usize, usize) {
    let ratio = in_len as f64 / target as f64;
    let window = ratio.ceil() as usize;
    let stride = (ratio.floor() as usize).max(1);
    (window, stride)
}

/// Start offsets of every window that fits, found by scanning.
pub fn placements(in_len: usize, window: usize, stride: usize) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut r = 0;
    while r + window <= in_len {
        starts.push(r);
        r += stride;
    }
    starts
}

/// NIRMAL output as max over (window ∪ {0}), plus its shape.
pub fn nirmal(input: &Tensor4, target_h: usize, target_w: usize) -> (Shape4, Vec<f64>) {
    let s = input.shape();
    let (ph, sh) = window_and_stride(s.height, target_h);
    let (pw, sw) = window_and_stride(s.width, target_w);
    let rows = placements(s.height, ph, sh);
    let cols = placements(s.width, pw, sw);
    let shape = Shape4::new(s.batch, rows.len(), cols.len(), s.channels).unwrap();
    let mut out = Vec::new();
    for b in 0..s.batch {
        for &r in &rows {
            for &q in &cols {
                for c in 0..s.channels {
                    let mut window = vec![0.0];
                    for x in r..r + ph {
                        for y in q..q + pw {
                            window.push(input.get(b, x, y, c).unwrap());
                        }
                    }
                    out.push(window.into_iter().fold(f64::NEG_INFINITY, f64::max));
                }
            }
        }
    }
    (shape, out)
}

/// Plain max pooling with explicit window/stride.
pub fn max_pool(input: &Tensor4, window: usize, stride: usize) -> Vec<f64> {
    let s = input.shape();
    let rows = placements(s.height, window, stride);
    let cols = placements(s.width, window, stride);
    let mut out = Vec::new();
    for b in 0..s.batch {
        for &r in &rows {
            for &q in &cols {
                for c in 0..s.channels {
                    let mut m = f64::NEG_INFINITY;
                    for x in r..r + window {
                        for y in q..q + window {
                            m = m.max(input.get(b, x, y, c).unwrap());
                        }
                    }
                    out.push(m);
                }
            }
        }
    }
    out
}

/// Valid cross-correlation by nested loops; kernel indexed (dx, dy, c, o).
pub fn conv(input: &Tensor4, kernel: &[f64], bias: &[f64], k: usize, out_ch: usize) -> Vec<f64> {
    let s = input.shape();
    let (oh, ow) = (s.height - k + 1, s.width - k + 1);
    let mut out = Vec::new();
    for b in 0..s.batch {
        for i in 0..oh {
            for j in 0..ow {
                for o in 0..out_ch {
                    let mut acc = bias[o];
                    for dx in 0..k {
                        for dy in 0..k {
                            for c in 0..s.channels {
                                let w = kernel[((dx * k + dy) * s.channels + c) * out_ch + o];
                                acc += input.get(b, i + dx, j + dy, c).unwrap() * w;
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    out
}
