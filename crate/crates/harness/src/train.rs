//! Training and evaluation loop.

use std::path::PathBuf;
use std::time::Instant;

use nirmal_core::nn::{argmax_rows, softmax_cross_entropy, Model};
use nirmal_core::optim::{adam_step, AdamState};

use crate::config::{DatasetKind, RunConfig};
use crate::data::{self, batches, synthetic, Dataset, Split};
use crate::error::{Error, Result};
use crate::report::{EpochMetrics, RunReport};

/// Images per forward pass during evaluation.
pub const EVAL_CHUNK: usize = 256;

/// Sub-directory of the data root that holds each dataset.
pub fn dataset_dir(kind: DatasetKind) -> &'static str {
    match kind {
        DatasetKind::MnistDigits => "mnist",
        DatasetKind::MnistFashion => "fashion-mnist",
        DatasetKind::Cifar10 => "cifar-10-batches-bin",
        DatasetKind::Synthetic => "",
    }
}

/// Loads the full training and test sets named by `config` (before limits
/// and the validation split).
pub fn load_datasets(config: &RunConfig) -> Result<(Dataset, Dataset)> {
    let dir = || -> PathBuf {
        data::data_root(config.data_dir.as_deref()).join(dataset_dir(config.dataset))
    };
    match config.dataset {
        DatasetKind::MnistDigits => data::load_mnist_dir(&dir(), "mnist_digits"),
        DatasetKind::MnistFashion => data::load_mnist_dir(&dir(), "mnist_fashion"),
        DatasetKind::Cifar10 => data::load_cifar10_dir(&dir()),
        DatasetKind::Synthetic => synthetic::train_test(config.seed),
    }
}

/// Applies limits, pixel scaling and the seeded validation split.
pub fn prepare_split(config: &RunConfig, train_full: Dataset, test: Dataset) -> Result<Split> {
    let limit = |ds: Dataset, n: Option<usize>| match n {
        Some(n) if n < ds.len() => ds.take(n),
        _ => ds,
    };
    let train_full =
        limit(train_full, config.train_limit).with_pixel_divisor(config.pixel_divisor)?;
    let test = limit(test, config.test_limit).with_pixel_divisor(config.pixel_divisor)?;
    Split::new(&train_full, test, config.val_fraction, config.seed)
}

/// Mean loss and accuracy over a whole dataset.
pub fn evaluate(model: &Model, ds: &Dataset) -> Result<(f64, f64)> {
    if ds.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let all: Vec<usize> = (0..ds.len()).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        let (x, labels) = ds.gather(chunk)?;
        let logits = model.predict(&x)?;
        let (loss, _) = softmax_cross_entropy(&logits, &labels)?;
        loss_sum += loss * chunk.len() as f64;
        correct += argmax_rows(&logits)
            .iter()
            .zip(&labels)
            .filter(|(p, l)| p == l)
            .count();
    }
    let n = ds.len() as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

/// Loads data per `config` and trains. `progress` sees each finished epoch.
pub fn run(config: &RunConfig, progress: &mut dyn FnMut(&EpochMetrics)) -> Result<RunReport> {
    config.validate()?;
    let (train_full, test) = load_datasets(config)?;
    let split = prepare_split(config, train_full, test)?;
    train_on(config, &split, progress)
}

/// Trains a freshly initialised model on `split.train` and evaluates it.
pub fn train_on(
    config: &RunConfig,
    split: &Split,
    progress: &mut dyn FnMut(&EpochMetrics),
) -> Result<RunReport> {
    config.validate()?;
    let started = Instant::now();
    let spec = config.model_spec()?;
    let dims = split.train.image_dims();
    if dims != spec.input {
        return Err(Error::Data(format!(
            "dataset images are {dims:?} but {} expects {:?}",
            config.dataset, spec.input
        )));
    }
    if split.train.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let mut model = Model::init(&spec, config.seed)?;
    let mut adam = AdamState::for_params(config.adam(), &model.params());
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in batches(
            split.train.len(),
            config.batch_size,
            config.seed,
            epoch as u64,
        ) {
            let (x, labels) = split.train.gather(&batch)?;
            let (loss, logits, grads) = model.loss_and_gradients(&x, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch: epoch + 1 });
            }
            adam_step(&mut model.params_mut(), &grads.as_slices(), &mut adam)?;
            loss_sum += loss * batch.len() as f64;
            correct += argmax_rows(&logits)
                .iter()
                .zip(&labels)
                .filter(|(p, l)| p == l)
                .count();
        }
        let n = split.train.len() as f64;
        let (val_loss, val_accuracy) = evaluate(&model, &split.val)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch: epoch + 1 });
        }
        let m = EpochMetrics {
            epoch: epoch + 1,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            val_loss,
            val_accuracy,
        };
        progress(&m);
        epochs.push(m);
    }

    let (test_loss, test_accuracy) = evaluate(&model, &split.test)?;
    Ok(RunReport {
        dataset: config.dataset.to_string(),
        variant: config.variant,
        seed: config.seed,
        fingerprint: config.fingerprint(),
        config: config.clone(),
        train_size: split.train.len(),
        val_size: split.val.len(),
        test_size: split.test.len(),
        parameters: model.param_count(),
        epochs,
        test_loss,
        test_accuracy,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        deterministic: true,
    })
}
