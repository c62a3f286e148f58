//! Two-class 8×8 grayscale toy set: class 1 carries a saturated 3×3 patch,
//! class 0 only background noise, so the classes are linearly separable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::Result;

pub const SIDE: usize = 8;
pub const PATCH: std::ops::Range<usize> = 2..5;
pub const NOISE_MAX: u8 = 100;

pub fn generate(n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Vec::with_capacity(n * SIDE * SIDE);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let label = (k % 2) as u8;
        for h in 0..SIDE {
            for w in 0..SIDE {
                let bright = label == 1 && PATCH.contains(&h) && PATCH.contains(&w);
                pixels.push(if bright {
                    255
                } else {
                    rng.random_range(0..=NOISE_MAX)
                });
            }
        }
        labels.push(label);
    }
    Dataset::from_bytes("synthetic", (SIDE, SIDE, 1), pixels, labels)
}

/// 640 training and 160 test images from independent streams.
pub fn train_test(seed: u64) -> Result<(Dataset, Dataset)> {
    Ok((generate(640, seed)?, generate(160, seed ^ 0x5EED_7E57)?))
}
