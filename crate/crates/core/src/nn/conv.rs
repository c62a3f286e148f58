//! Valid (unpadded), stride-1 2-D cross-correlation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor4};

/// Convolution weights. `kernel` is laid out `(kh, kw, in_ch, out_ch)`
/// row-major, so the output-channel axis is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub kh: usize,
    pub kw: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients produced by [`Conv2d::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2dGrads {
    pub input: Tensor4,
    pub kernel: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn zeros(kh: usize, kw: usize, in_ch: usize, out_ch: usize) -> Self {
        Conv2d {
            kh,
            kw,
            in_ch,
            out_ch,
            kernel: vec![0.0; kh * kw * in_ch * out_ch],
            bias: vec![0.0; out_ch],
        }
    }

    pub fn from_parts(
        kh: usize,
        kw: usize,
        in_ch: usize,
        out_ch: usize,
        kernel: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if kh == 0 || kw == 0 || in_ch == 0 || out_ch == 0 {
            return Err(Error::Param(
                "convolution extents must be at least 1".into(),
            ));
        }
        if kernel.len() != kh * kw * in_ch * out_ch || bias.len() != out_ch {
            return Err(Error::Param(format!(
                "kernel/bias lengths {}/{} do not match {kh}x{kw}x{in_ch}x{out_ch}",
                kernel.len(),
                bias.len()
            )));
        }
        Ok(Conv2d {
            kh,
            kw,
            in_ch,
            out_ch,
            kernel,
            bias,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.kh * self.kw * self.in_ch
    }

    #[inline]
    fn kernel_offset(&self, dx: usize, dy: usize, c: usize) -> usize {
        ((dx * self.kw + dy) * self.in_ch + c) * self.out_ch
    }

    pub fn output_shape(&self, input: Shape4) -> Result<Shape4> {
        if input.channels != self.in_ch {
            return Err(Error::Param(format!(
                "input {input} has {} channels, kernel expects {}",
                input.channels, self.in_ch
            )));
        }
        if input.height < self.kh || input.width < self.kw {
            return Err(Error::Param(format!(
                "input {input} smaller than {}x{} kernel",
                self.kh, self.kw
            )));
        }
        Shape4::new(
            input.batch,
            input.height - self.kh + 1,
            input.width - self.kw + 1,
            self.out_ch,
        )
    }

    /// `out[b,i,j,o] = bias[o] + Σ input[b,i+dx,j+dy,c] · kernel[dx,dy,c,o]`.
    pub fn forward(&self, input: &Tensor4) -> Result<Tensor4> {
        let s = input.shape();
        let os = self.output_shape(s)?;
        let x = input.data();
        let mut out = vec![0.0; os.len()];
        for b in 0..s.batch {
            for i in 0..os.height {
                for j in 0..os.width {
                    let o = os.offset(b, i, j, 0);
                    let acc = &mut out[o..o + self.out_ch];
                    acc.copy_from_slice(&self.bias);
                    for dx in 0..self.kh {
                        for dy in 0..self.kw {
                            let xi = s.offset(b, i + dx, j + dy, 0);
                            for c in 0..self.in_ch {
                                let v = x[xi + c];
                                let k = self.kernel_offset(dx, dy, c);
                                let row = &self.kernel[k..k + self.out_ch];
                                for (a, &w) in acc.iter_mut().zip(row) {
                                    *a += v * w;
                                }
                            }
                        }
                    }
                }
            }
        }
        Tensor4::from_vec(os, out)
    }

    /// Gradients of [`forward`](Self::forward) given the input it saw and the
    /// upstream gradient.
    pub fn backward(&self, input: &Tensor4, grad_out: &Tensor4) -> Result<Conv2dGrads> {
        let s = input.shape();
        let os = self.output_shape(s)?;
        if grad_out.shape() != os {
            return Err(Error::Param(format!(
                "gradient shape {} does not match convolution output {os}",
                grad_out.shape()
            )));
        }
        let x = input.data();
        let g = grad_out.data();
        let mut grad_input = vec![0.0; s.len()];
        let mut grad_kernel = vec![0.0; self.kernel.len()];
        let mut grad_bias = vec![0.0; self.out_ch];

        for b in 0..s.batch {
            for i in 0..os.height {
                for j in 0..os.width {
                    let o = os.offset(b, i, j, 0);
                    let go = &g[o..o + self.out_ch];
                    for (gb, &v) in grad_bias.iter_mut().zip(go) {
                        *gb += v;
                    }
                    for dx in 0..self.kh {
                        for dy in 0..self.kw {
                            let xi = s.offset(b, i + dx, j + dy, 0);
                            for c in 0..self.in_ch {
                                let k = self.kernel_offset(dx, dy, c);
                                let w = &self.kernel[k..k + self.out_ch];
                                let gk = &mut grad_kernel[k..k + self.out_ch];
                                let v = x[xi + c];
                                let mut dot = 0.0;
                                for ((gkv, &wv), &gv) in gk.iter_mut().zip(w).zip(go) {
                                    *gkv += v * gv;
                                    dot += wv * gv;
                                }
                                grad_input[xi + c] += dot;
                            }
                        }
                    }
                }
            }
        }

        Ok(Conv2dGrads {
            input: Tensor4::from_vec(s, grad_input)?,
            kernel: grad_kernel,
            bias: grad_bias,
        })
    }
}

/// Free-function form of [`Conv2d::forward`].
pub fn conv2d_forward(input: &Tensor4, layer: &Conv2d) -> Result<Tensor4> {
    layer.forward(input)
}

/// Free-function form of [`Conv2d::backward`].
pub fn conv2d_backward(input: &Tensor4, grad_out: &Tensor4, layer: &Conv2d) -> Result<Conv2dGrads> {
    layer.backward(input, grad_out)
}
