//! Dense rank-4 tensors in batch-height-width-channel layout.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Extents of a rank-4 tensor, `(batch, height, width, channels)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape4 {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape4 {
    /// Checked constructor: every extent must be at least 1 and the element
    /// count must fit in `usize`.
    pub fn new(batch: usize, height: usize, width: usize, channels: usize) -> Result<Self> {
        let shape = Shape4 {
            batch,
            height,
            width,
            channels,
        };
        if batch == 0 || height == 0 || width == 0 || channels == 0 {
            return Err(Error::Size(format!("zero extent in shape {shape}")));
        }
        shape.checked_len()?;
        Ok(shape)
    }

    fn checked_len(&self) -> Result<usize> {
        self.batch
            .checked_mul(self.height)
            .and_then(|n| n.checked_mul(self.width))
            .and_then(|n| n.checked_mul(self.channels))
            .ok_or_else(|| Error::Size(format!("element count of {self} overflows")))
    }

    /// Number of elements. Only valid shapes are constructed, so this never
    /// overflows.
    pub fn len(&self) -> usize {
        self.batch * self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements in one batch item.
    pub fn item_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    /// Row-major offset `((b·H + h)·W + w)·C + c`, without bounds checks.
    #[inline]
    pub fn offset(&self, b: usize, h: usize, w: usize, c: usize) -> usize {
        ((b * self.height + h) * self.width + w) * self.channels + c
    }

    /// Bounds-checked [`offset`](Self::offset).
    pub fn flat_index(&self, b: usize, h: usize, w: usize, c: usize) -> Result<usize> {
        if b >= self.batch || h >= self.height || w >= self.width || c >= self.channels {
            return Err(Error::Index {
                b,
                h,
                w,
                c,
                shape: format!("{self}"),
            });
        }
        Ok(self.offset(b, h, w, c))
    }

    /// Same spatial extents with a different batch size.
    pub fn with_batch(&self, batch: usize) -> Result<Self> {
        Shape4::new(batch, self.height, self.width, self.channels)
    }
}

impl fmt::Display for Shape4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.batch, self.height, self.width, self.channels
        )
    }
}

/// Dense `f64` tensor. `data.len() == shape.len()` always holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    shape: Shape4,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(shape: Shape4) -> Self {
        Tensor4 {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    /// Builds a tensor of the given extents, validating them first.
    pub fn zeros_checked(
        batch: usize,
        height: usize,
        width: usize,
        channels: usize,
    ) -> Result<Self> {
        Ok(Self::zeros(Shape4::new(batch, height, width, channels)?))
    }

    pub fn filled(shape: Shape4, value: f64) -> Self {
        Tensor4 {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape4, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Size(format!(
                "data length {} does not match shape {shape} ({} elements)",
                data.len(),
                shape.len()
            )));
        }
        Ok(Tensor4 { shape, data })
    }

    /// Builds a tensor by evaluating `f(b, h, w, c)` in storage order.
    pub fn from_fn(shape: Shape4, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for b in 0..shape.batch {
            for h in 0..shape.height {
                for w in 0..shape.width {
                    for c in 0..shape.channels {
                        data.push(f(b, h, w, c));
                    }
                }
            }
        }
        Tensor4 { shape, data }
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, b: usize, h: usize, w: usize, c: usize) -> Result<f64> {
        Ok(self.data[self.shape.flat_index(b, h, w, c)?])
    }

    pub fn set(&mut self, b: usize, h: usize, w: usize, c: usize, value: f64) -> Result<()> {
        let i = self.shape.flat_index(b, h, w, c)?;
        self.data[i] = value;
        Ok(())
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshape(self, shape: Shape4) -> Result<Self> {
        Self::from_vec(shape, self.data)
    }

    /// Collapses each batch item to `(batch, 1, 1, H·W·C)`.
    pub fn flatten(self) -> Self {
        let s = self.shape;
        let shape = Shape4 {
            batch: s.batch,
            height: 1,
            width: 1,
            channels: s.item_len(),
        };
        Tensor4 {
            shape,
            data: self.data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Tensor4 {
            shape: self.shape,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `max(0, x)` elementwise. Negative zero maps to positive zero.
    pub fn relu(&self) -> Self {
        self.map(relu)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Scalar ReLU. Returns `+0.0` for every input that is not strictly positive.
#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Elementwise ReLU over a tensor.
pub fn elementwise_relu(t: &Tensor4) -> Tensor4 {
    t.relu()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(b: usize, h: usize, w: usize, c: usize) -> Shape4 {
        Shape4::new(b, h, w, c).unwrap()
    }

    #[test]
    fn zeros_examples() {
        let t = Tensor4::zeros(shape(1, 2, 2, 1));
        assert_eq!(t.data(), &[0.0; 4]);
        assert_eq!(Tensor4::zeros(shape(1, 1, 1, 1)).sum(), 0.0);
        assert_eq!(Tensor4::zeros(shape(2, 3, 3, 4)).data().len(), 72);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(Shape4::new(0, 1, 1, 1), Err(Error::Size(_))));
        assert!(matches!(
            Shape4::new(usize::MAX, 2, 1, 1),
            Err(Error::Size(_))
        ));
        assert!(Tensor4::from_vec(shape(1, 2, 2, 1), vec![0.0; 3]).is_err());
    }

    #[test]
    fn relu_examples() {
        let t = Tensor4::from_vec(shape(1, 1, 4, 1), vec![-1.5, 0.0, 2.0, -0.0]).unwrap();
        let r = elementwise_relu(&t);
        assert_eq!(r.data(), &[0.0, 0.0, 2.0, 0.0]);
        // -0.0 normalizes to +0.0 bitwise
        assert_eq!(r.data()[3].to_bits(), 0.0f64.to_bits());

        let pos = Tensor4::from_vec(shape(1, 1, 3, 1), vec![0.5, 1.0, 3.0]).unwrap();
        assert_eq!(pos.relu(), pos);
        let neg = Tensor4::from_vec(shape(1, 1, 3, 1), vec![-0.5, -1.0, -3.0]).unwrap();
        assert_eq!(neg.relu(), Tensor4::zeros(neg.shape()));
    }

    #[test]
    fn get_set_and_offsets() {
        let mut t = Tensor4::zeros(shape(1, 2, 2, 1));
        t.set(0, 1, 0, 0, 7.0).unwrap();
        assert_eq!(t.get(0, 1, 0, 0).unwrap(), 7.0);
        assert_eq!(shape(1, 2, 2, 1).flat_index(0, 1, 0, 0).unwrap(), 2);
        assert_eq!(shape(2, 3, 3, 2).flat_index(1, 0, 0, 0).unwrap(), 18);
        assert!(matches!(t.get(0, 2, 0, 0), Err(Error::Index { .. })));
        assert!(matches!(t.set(1, 0, 0, 0, 1.0), Err(Error::Index { .. })));
    }

    #[test]
    fn flatten_keeps_storage() {
        let t = Tensor4::from_fn(shape(2, 2, 3, 2), |b, h, w, c| {
            (b * 100 + h * 10 + w * 2 + c) as f64
        });
        let data = t.data().to_vec();
        let f = t.flatten();
        assert_eq!(f.shape(), shape(2, 1, 1, 12));
        assert_eq!(f.data(), &data[..]);
    }
}
