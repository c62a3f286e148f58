//! Layers with forward and backward passes, and the sequential model that
//! chains them.

pub mod conv;
pub mod dense;
pub mod loss;
pub mod model;

pub use conv::{conv2d_backward, conv2d_forward, Conv2d, Conv2dGrads};
pub use dense::{dense_backward, dense_forward, Dense, DenseGrads};
pub use loss::{argmax_rows, softmax_cross_entropy};
pub use model::{
    ActivationPlacement, Architecture, Gradients, Layer, LayerSpec, Model, ModelSpec, PoolLayout,
    PoolingVariant, Trace,
};
