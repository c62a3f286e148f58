use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor4};

/// Fully-connected layer. Inputs are `(batch, 1, 1, in_features)`; weights
/// are `(in_features × out_features)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_features: usize,
    pub out_features: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub input: Tensor4,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_features: usize, out_features: usize) -> Self {
        Dense {
            in_features,
            out_features,
            weights: vec![0.0; in_features * out_features],
            bias: vec![0.0; out_features],
        }
    }

    pub fn from_parts(
        in_features: usize,
        out_features: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if in_features == 0 || out_features == 0 {
            return Err(Error::Param("dense extents must be at least 1".into()));
        }
        if weights.len() != in_features * out_features || bias.len() != out_features {
            return Err(Error::Param(format!(
                "weight/bias lengths {}/{} do not match {in_features}x{out_features}",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Dense {
            in_features,
            out_features,
            weights,
            bias,
        })
    }

    fn check_input(&self, s: Shape4) -> Result<()> {
        if s.item_len() != self.in_features || s.height != 1 || s.width != 1 {
            return Err(Error::Param(format!(
                "dense layer expects (batch, 1, 1, {}), got {s}",
                self.in_features
            )));
        }
        Ok(())
    }

    /// `out = input · weights + bias`.
    pub fn forward(&self, input: &Tensor4) -> Result<Tensor4> {
        let s = input.shape();
        self.check_input(s)?;
        let os = Shape4::new(s.batch, 1, 1, self.out_features)?;
        let mut out = vec![0.0; os.len()];
        for (x, y) in input
            .data()
            .chunks_exact(self.in_features)
            .zip(out.chunks_exact_mut(self.out_features))
        {
            y.copy_from_slice(&self.bias);
            for (&v, row) in x.iter().zip(self.weights.chunks_exact(self.out_features)) {
                if v == 0.0 {
                    continue;
                }
                for (a, &w) in y.iter_mut().zip(row) {
                    *a += v * w;
                }
            }
        }
        Tensor4::from_vec(os, out)
    }

    pub fn backward(&self, input: &Tensor4, grad_out: &Tensor4) -> Result<DenseGrads> {
        let s = input.shape();
        self.check_input(s)?;
        let os = Shape4::new(s.batch, 1, 1, self.out_features)?;
        if grad_out.shape() != os {
            return Err(Error::Param(format!(
                "gradient shape {} does not match dense output {os}",
                grad_out.shape()
            )));
        }
        let mut grad_input = vec![0.0; s.len()];
        let mut grad_weights = vec![0.0; self.weights.len()];
        let mut grad_bias = vec![0.0; self.out_features];
        for ((x, g), gx) in input
            .data()
            .chunks_exact(self.in_features)
            .zip(grad_out.data().chunks_exact(self.out_features))
            .zip(grad_input.chunks_exact_mut(self.in_features))
        {
            for (gb, &v) in grad_bias.iter_mut().zip(g) {
                *gb += v;
            }
            for (((&v, row), grow), gxi) in x
                .iter()
                .zip(self.weights.chunks_exact(self.out_features))
                .zip(grad_weights.chunks_exact_mut(self.out_features))
                .zip(gx.iter_mut())
            {
                let mut dot = 0.0;
                for ((gw, &w), &gv) in grow.iter_mut().zip(row).zip(g) {
                    *gw += v * gv;
                    dot += w * gv;
                }
                *gxi = dot;
            }
        }
        Ok(DenseGrads {
            input: Tensor4::from_vec(s, grad_input)?,
            weights: grad_weights,
            bias: grad_bias,
        })
    }
}

pub fn dense_forward(input: &Tensor4, layer: &Dense) -> Result<Tensor4> {
    layer.forward(input)
}

pub fn dense_backward(input: &Tensor4, grad_out: &Tensor4, layer: &Dense) -> Result<DenseGrads> {
    layer.backward(input, grad_out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights() {
        let mut w = vec![0.0; 9];
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let layer = Dense::from_parts(3, 3, w, vec![0.0; 3]).unwrap();
        let x = Tensor4::from_vec(
            Shape4::new(2, 1, 1, 3).unwrap(),
            vec![1.0, -2.0, 3.5, 0.0, 4.0, -1.0],
        )
        .unwrap();
        assert_eq!(layer.forward(&x).unwrap(), x);
    }

    #[test]
    fn zero_input_gives_bias() {
        let layer = Dense::from_parts(2, 3, vec![0.5; 6], vec![1.0, -2.0, 0.25]).unwrap();
        let x = Tensor4::zeros(Shape4::new(1, 1, 1, 2).unwrap());
        assert_eq!(layer.forward(&x).unwrap().data(), &[1.0, -2.0, 0.25]);
    }

    #[test]
    fn shape_errors() {
        let layer = Dense::zeros(4, 2);
        assert!(layer
            .forward(&Tensor4::zeros(Shape4::new(1, 1, 1, 5).unwrap()))
            .is_err());
        assert!(layer
            .forward(&Tensor4::zeros(Shape4::new(1, 2, 1, 2).unwrap()))
            .is_err());
        let x = Tensor4::zeros(Shape4::new(2, 1, 1, 4).unwrap());
        let g = Tensor4::zeros(Shape4::new(1, 1, 1, 2).unwrap());
        assert!(layer.backward(&x, &g).is_err());
    }
}
