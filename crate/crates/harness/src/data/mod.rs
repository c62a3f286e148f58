//! Image datasets: decoding, normalization, splits and batching.

pub mod cifar;
pub mod idx;
pub mod synthetic;

use std::path::{Path, PathBuf};

use nirmal_core::{Shape4, Tensor4};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const CLASSES: usize = 10;
pub const DATA_DIR_ENV: &str = "NIRMAL_DATA_DIR";

/// Labelled images stored as raw bytes in `(N, H, W, C)` order. Pixels are
/// scaled to reals on the way out, by `1 / pixel_divisor`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    dims: (usize, usize, usize),
    pixels: Vec<u8>,
    labels: Vec<u8>,
    pixel_divisor: f64,
}

impl Dataset {
    /// Validates that pixel and label counts agree and that every label is
    /// a class index below [`CLASSES`].
    pub fn from_bytes(
        name: impl Into<String>,
        dims: (usize, usize, usize),
        pixels: Vec<u8>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let item = dims.0 * dims.1 * dims.2;
        if item == 0 {
            return Err(Error::Format(format!("empty image dimensions {dims:?}")));
        }
        if pixels.len() != item * labels.len() {
            return Err(Error::Format(format!(
                "{} pixel bytes for {} labels of {dims:?} images",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some((k, &l)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| usize::from(l) >= CLASSES)
        {
            return Err(Error::Data(format!(
                "label {l} at index {k} outside 0..{CLASSES}"
            )));
        }
        Ok(Dataset {
            name: name.into(),
            dims,
            pixels,
            labels,
            pixel_divisor: 255.0,
        })
    }

    pub fn with_pixel_divisor(mut self, divisor: f64) -> Result<Self> {
        if !(divisor.is_finite() && divisor > 0.0) {
            return Err(Error::Config(format!(
                "pixel divisor must be positive, got {divisor}"
            )));
        }
        self.pixel_divisor = divisor;
        Ok(self)
    }

    pub fn pixel_divisor(&self) -> f64 {
        self.pixel_divisor
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(height, width, channels)` of one image.
    pub fn image_dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    fn item_len(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn image_bytes(&self, k: usize) -> &[u8] {
        let n = self.item_len();
        &self.pixels[k * n..(k + 1) * n]
    }

    /// A new dataset holding the listed items in the listed order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut pixels = Vec::with_capacity(indices.len() * self.item_len());
        let mut labels = Vec::with_capacity(indices.len());
        for &k in indices {
            pixels.extend_from_slice(self.image_bytes(k));
            labels.push(self.labels[k]);
        }
        Dataset {
            name: self.name.clone(),
            dims: self.dims,
            pixels,
            labels,
            pixel_divisor: self.pixel_divisor,
        }
    }

    /// The first `n` items (all of them if `n ≥ len`).
    pub fn take(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Normalized images and labels for the listed items.
    pub fn gather(&self, indices: &[usize]) -> Result<(Tensor4, Vec<usize>)> {
        let (h, w, c) = self.dims;
        let shape = Shape4::new(indices.len(), h, w, c)?;
        let mut data = Vec::with_capacity(shape.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &k in indices {
            data.extend(
                self.image_bytes(k)
                    .iter()
                    .map(|&p| f64::from(p) / self.pixel_divisor),
            );
            labels.push(usize::from(self.labels[k]));
        }
        Ok((Tensor4::from_vec(shape, data)?, labels))
    }

    /// Every image as one normalized tensor.
    pub fn to_tensor(&self) -> Result<Tensor4> {
        let idx: Vec<usize> = (0..self.len()).collect();
        Ok(self.gather(&idx)?.0)
    }
}

/// Train/validation/test partition plus the seed that produced it.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub seed: u64,
}

impl Split {
    pub fn new(train_full: &Dataset, test: Dataset, val_fraction: f64, seed: u64) -> Result<Self> {
        let (train, val) = split_train_val(train_full, val_fraction, seed)?;
        Ok(Split {
            train,
            val,
            test,
            seed,
        })
    }
}

/// Seeded shuffle, then the first `round(fraction · N)` items become the
/// validation set and the rest the training set.
pub fn split_train_val(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "validation fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (fraction * ds.len() as f64).round() as usize;
    let (val, train) = order.split_at(n_val);
    Ok((ds.subset(train), ds.subset(val)))
}

/// Index batches for one epoch: a permutation of `0..n` drawn from a
/// ChaCha8 stream selected by `epoch`, cut into chunks of `batch_size`. The
/// final partial batch is kept.
pub fn batches(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let batch_size = batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Resolves the dataset root: explicit path, then `NIRMAL_DATA_DIR`, then
/// `./data`.
pub fn data_root(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("data"),
    }
}

/// Loads `train-*` and `t10k-*` IDX pairs from `dir`.
pub fn load_mnist_dir(dir: &Path, name: &str) -> Result<(Dataset, Dataset)> {
    let part = |images: &str, labels: &str| -> Result<Dataset> {
        let img = idx::load_idx_images(&dir.join(images))?;
        let lab = idx::load_idx_labels(&dir.join(labels))?;
        if img.count != lab.len() {
            return Err(Error::Format(format!(
                "{images} holds {} images but {labels} holds {} labels",
                img.count,
                lab.len()
            )));
        }
        Dataset::from_bytes(name, (img.rows, img.cols, 1), img.pixels, lab)
    };
    Ok((
        part("train-images-idx3-ubyte", "train-labels-idx1-ubyte")?,
        part("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")?,
    ))
}

pub fn load_cifar10_dir(dir: &Path) -> Result<(Dataset, Dataset)> {
    let train: Vec<PathBuf> = (1..=5)
        .map(|k| dir.join(format!("data_batch_{k}.bin")))
        .collect();
    Ok((
        cifar::load_cifar10(&train, "cifar10")?,
        cifar::load_cifar10(&[dir.join("test_batch.bin")], "cifar10")?,
    ))
}
