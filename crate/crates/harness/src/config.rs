//! Run configuration: defaults, key-value config files, fingerprints.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use nirmal_core::nn::{ActivationPlacement, Architecture, ModelSpec, PoolLayout, PoolingVariant};
use nirmal_core::optim::AdamConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    #[value(name = "mnist_digits")]
    MnistDigits,
    #[value(name = "mnist_fashion")]
    MnistFashion,
    #[value(name = "cifar10")]
    Cifar10,
    #[value(name = "synthetic")]
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Nirmal,
    Max2x2,
}

/// `auto` means pool-only for NIRMAL and after-conv for the max baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Auto,
    #[value(name = "after_conv")]
    AfterConv,
    #[value(name = "pool_only")]
    PoolOnly,
}

/// `auto` pools after every convolution when the input is large enough, and
/// once after the last convolution otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Auto,
    Interleaved,
    Single,
}

macro_rules! display_via_value_enum {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
            }
        }
    )*};
}
display_via_value_enum!(DatasetKind, Variant, Activation, Layout);

impl From<Variant> for PoolingVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Nirmal => PoolingVariant::Nirmal,
            Variant::Max2x2 => PoolingVariant::Max2x2,
        }
    }
}

/// A NIRMAL pooling target, written `HxW` (or a single `N` for square).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PoolTarget {
    pub height: usize,
    pub width: usize,
}

impl std::str::FromStr for PoolTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "bad pool target {s:?}: expected HxW with positive integers"
                    ))
                })
        };
        match s.split_once(['x', 'X']) {
            Some((h, w)) => Ok(PoolTarget {
                height: parse(h)?,
                width: parse(w)?,
            }),
            None => {
                let n = parse(s)?;
                Ok(PoolTarget {
                    height: n,
                    width: n,
                })
            }
        }
    }
}

impl fmt::Display for PoolTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

pub fn parse_pool_targets(s: &str) -> Result<Vec<PoolTarget>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetKind,
    pub variant: Variant,
    pub activation: Activation,
    pub layout: Layout,
    pub epochs: usize,
    pub batch_size: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Per pooling stage; empty stages default to halving.
    pub pool_targets: Vec<PoolTarget>,
    pub pixel_divisor: f64,
    /// Use only the first N training images (before the validation split).
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub desk_scale: bool,
    pub data_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Report file stem; defaults to `<dataset>-<variant>-s<seed>`.
    pub name: Option<String>,
}

pub const DESK_TRAIN: usize = 10_000;
pub const DESK_TEST: usize = 2_000;
pub const DESK_EPOCHS: usize = 3;

impl Default for RunConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        RunConfig {
            dataset: DatasetKind::MnistDigits,
            variant: Variant::Nirmal,
            activation: Activation::Auto,
            layout: Layout::Auto,
            epochs: 10,
            batch_size: 64,
            val_fraction: 0.1,
            seed: 42,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            pool_targets: Vec::new(),
            pixel_divisor: 255.0,
            train_limit: None,
            test_limit: None,
            desk_scale: false,
            data_dir: None,
            output_dir: PathBuf::from("results"),
            name: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T> {
    T::from_str(value.trim(), true).map_err(|_| {
        let allowed: Vec<String> = T::value_variants()
            .iter()
            .filter_map(|v| v.to_possible_value().map(|p| p.get_name().to_string()))
            .collect();
        Error::Config(format!(
            "invalid value {value:?} for {key}; expected one of {}",
            allowed.join(", ")
        ))
    })
}

fn parse_optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "none" => Ok(None),
        v => parse_value(key, v).map(Some),
    }
}

impl RunConfig {
    /// Applies the reduced data/epoch preset used for quick runs.
    pub fn apply_desk_scale(&mut self) {
        self.desk_scale = true;
        self.train_limit = Some(DESK_TRAIN);
        self.test_limit = Some(DESK_TEST);
        self.epochs = DESK_EPOCHS;
    }

    /// Sets one field from its textual form. Keys match the CLI flag names;
    /// hyphens and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        match k {
            "dataset" => self.dataset = parse_enum(k, value)?,
            "variant" => self.variant = parse_enum(k, value)?,
            "activation" => self.activation = parse_enum(k, value)?,
            "layout" => self.layout = parse_enum(k, value)?,
            "epochs" => self.epochs = parse_value(k, value)?,
            "batch_size" => self.batch_size = parse_value(k, value)?,
            "val_fraction" => self.val_fraction = parse_value(k, value)?,
            "seed" => self.seed = parse_value(k, value)?,
            "lr" => self.lr = parse_value(k, value)?,
            "beta1" => self.beta1 = parse_value(k, value)?,
            "beta2" => self.beta2 = parse_value(k, value)?,
            "epsilon" => self.epsilon = parse_value(k, value)?,
            "pool_targets" => self.pool_targets = parse_pool_targets(value)?,
            "pixel_divisor" => self.pixel_divisor = parse_value(k, value)?,
            "train_limit" => self.train_limit = parse_optional(k, value)?,
            "test_limit" => self.test_limit = parse_optional(k, value)?,
            "desk_scale" => {
                if parse_value::<bool>(k, value)? {
                    self.apply_desk_scale();
                } else {
                    self.desk_scale = false;
                }
            }
            "data_dir" => self.data_dir = parse_optional(k, value)?,
            "output_dir" => self.output_dir = parse_value(k, value)?,
            "name" => self.name = parse_optional(k, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    /// A `desk_scale` line is applied first so explicit sizes override it.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got {raw:?}", n + 1))
            })?;
            pairs.push((key.trim().replace('-', "_"), value.trim().to_string()));
        }
        pairs.sort_by_key(|(k, _)| k != "desk_scale");
        for (key, value) in pairs {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn apply_kv_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        self.apply_kv_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            ));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.pixel_divisor.is_finite() && self.pixel_divisor > 0.0) {
            return bad(format!(
                "pixel_divisor must be positive, got {}",
                self.pixel_divisor
            ));
        }
        if self.train_limit == Some(0) || self.test_limit == Some(0) {
            return bad("data limits must be at least 1".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn placement(&self) -> ActivationPlacement {
        match (self.activation, self.variant) {
            (Activation::AfterConv, _) | (Activation::Auto, Variant::Max2x2) => {
                ActivationPlacement::AfterConv
            }
            (Activation::PoolOnly, _) | (Activation::Auto, Variant::Nirmal) => {
                ActivationPlacement::PoolOnly
            }
        }
    }

    pub fn input_dims(&self) -> (usize, usize, usize) {
        match self.dataset {
            DatasetKind::MnistDigits | DatasetKind::MnistFashion => (28, 28, 1),
            DatasetKind::Cifar10 => (32, 32, 3),
            DatasetKind::Synthetic => (8, 8, 1),
        }
    }

    /// The two-conv reference network for this dataset and variant.
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let mut arch =
            Architecture::reference(self.input_dims(), self.variant.into(), self.placement());
        arch.pool_targets = self
            .pool_targets
            .iter()
            .map(|t| (t.height, t.width))
            .collect();
        let build = |layout| {
            let arch = Architecture {
                layout,
                ..arch.clone()
            };
            ModelSpec::build(&arch)
                .map_err(|e| Error::Config(format!("model does not compose: {e}")))
        };
        match self.layout {
            Layout::Interleaved => build(PoolLayout::Interleaved),
            Layout::Single => build(PoolLayout::Single),
            Layout::Auto => build(PoolLayout::Interleaved).or_else(|_| build(PoolLayout::Single)),
        }
    }

    /// Short hex digest of every field.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    pub fn report_stem(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}-{}-s{}", self.dataset, self.variant, self.seed))
    }
}
