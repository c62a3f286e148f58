//! Adaptive max pooling fused with ReLU ("NIRMAL" pooling) and the small
//! convolutional network stack needed to train and benchmark it.
//!
//! The crate is `no_std` and only needs `alloc`. All numerics are `f64` and
//! every operation is a deterministic, single-threaded function of its
//! inputs, so two runs with identical inputs produce bitwise-identical
//! outputs.
//!
//! Layout is batch-height-width-channel throughout; see [`tensor::Tensor4`].
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod gradcheck;
pub mod nn;
pub mod optim;
pub mod pooling;
pub mod tensor;

pub use error::{Error, Result};
pub use pooling::{PoolCache, PoolParams};
pub use tensor::{Shape4, Tensor4};
