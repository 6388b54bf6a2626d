use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::catalog;
use crate::train::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    /// Synthetic labelled squares and discs.
    TwoShapes,
    /// IDX files in the directory `dataset_path`.
    FashionMnist,
    /// CIFAR binary batches in the directory `dataset_path`.
    Cifar10,
    /// Random patches of the image at `dataset_path`.
    Texture,
    /// Random patches of a synthetic brick wall.
    Brick,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::TwoShapes => "two_shapes",
            DatasetKind::FashionMnist => "fashion_mnist",
            DatasetKind::Cifar10 => "cifar10",
            DatasetKind::Texture => "texture",
            DatasetKind::Brick => "brick",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            DatasetKind::TwoShapes,
            DatasetKind::FashionMnist,
            DatasetKind::Cifar10,
            DatasetKind::Texture,
            DatasetKind::Brick,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub path: Option<PathBuf>,
    /// Side of generated or cropped images.
    pub image_size: usize,
    /// Image counts before constraint sources are removed; 0 keeps every
    /// available image for file-backed datasets.
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FidBackend {
    /// Seeded random projection followed by `tanh`.
    RandomProjection { dim: usize, seed: u64 },
    /// Small classifier trained on the labelled training images.
    Classifier { epochs: usize, seed: u64 },
}

impl FidBackend {
    pub fn kind_name(&self) -> &'static str {
        match self {
            FidBackend::RandomProjection { .. } => "randproj",
            FidBackend::Classifier { .. } => "cnn",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    /// Generated samples per constraint map entering the FID.
    pub fid_samples_per_map: usize,
    /// Maps used for the diversity score (0 skips it).
    pub diversity_maps: usize,
    pub diversity_pairs: usize,
    pub connectivity_max_lag: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            fid_samples_per_map: 4,
            diversity_maps: 8,
            diversity_pairs: 4,
            connectivity_max_lag: crate::metrics::connectivity::DEFAULT_MAX_LAG,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "f32" => Some(Precision::F32),
            "f64" => Some(Precision::F64),
            _ => None,
        }
    }
}

/// Everything one command needs. Read from flat `key = value` text.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    /// Catalog name of the generator.
    pub generator: String,
    /// Catalog name of the discriminator; defaults to the generator's pair.
    pub discriminator: Option<String>,
    pub train: TrainConfig,
    pub fid: FidBackend,
    pub eval: EvalConfig,
    pub out: PathBuf,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub precision: Precision,
    /// Continue from `out/ckpt` when it exists.
    pub resume: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetConfig {
                kind: DatasetKind::TwoShapes,
                path: None,
                image_size: 16,
                train_size: 512,
                validation_size: 128,
                test_size: 128,
                seed: 0,
            },
            generator: "dcgan_desk16".into(),
            discriminator: None,
            train: TrainConfig::default(),
            fid: FidBackend::RandomProjection { dim: 64, seed: 0 },
            eval: EvalConfig::default(),
            out: PathBuf::from("runs/default"),
            lambdas: vec![0.0, 1.0, 10.0],
            seeds: vec![0, 1, 2],
            precision: Precision::F32,
            resume: false,
        }
    }
}

/// Keys understood besides the training keys.
pub const EXPERIMENT_KEYS: &[&str] = &[
    "dataset",
    "dataset_path",
    "image_size",
    "train_size",
    "validation_size",
    "test_size",
    "data_seed",
    "generator",
    "discriminator",
    "fid_backend",
    "fid_dim",
    "fid_seed",
    "classifier_epochs",
    "fid_samples_per_map",
    "diversity_maps",
    "diversity_pairs",
    "connectivity_max_lag",
    "out",
    "lambdas",
    "seeds",
    "precision",
    "resume",
];

fn num<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn list<V: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<V>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn join<V: ToString>(xs: &[V]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if self.train.set(key, value)? {
            return Ok(());
        }
        let d = &mut self.dataset;
        match key {
            "dataset" => {
                d.kind = DatasetKind::parse(value).ok_or_else(|| Error::config(key, format!("unknown dataset `{value}`")))?
            }
            "dataset_path" => d.path = Some(PathBuf::from(value)),
            "image_size" => d.image_size = num(key, value)?,
            "train_size" => d.train_size = num(key, value)?,
            "validation_size" => d.validation_size = num(key, value)?,
            "test_size" => d.test_size = num(key, value)?,
            "data_seed" => d.seed = num(key, value)?,
            "generator" => self.generator = value.to_string(),
            "discriminator" => self.discriminator = Some(value.to_string()),
            "fid_backend" => {
                self.fid = match value {
                    "randproj" => FidBackend::RandomProjection { dim: 64, seed: 0 },
                    "cnn" => FidBackend::Classifier { epochs: 5, seed: 0 },
                    _ => return Err(Error::config(key, format!("unknown backend `{value}`"))),
                }
            }
            "fid_dim" => match &mut self.fid {
                FidBackend::RandomProjection { dim, .. } => *dim = num(key, value)?,
                FidBackend::Classifier { .. } => return Err(Error::config(key, "only applies to fid_backend = randproj")),
            },
            "fid_seed" => match &mut self.fid {
                FidBackend::RandomProjection { seed, .. } | FidBackend::Classifier { seed, .. } => *seed = num(key, value)?,
            },
            "classifier_epochs" => match &mut self.fid {
                FidBackend::Classifier { epochs, .. } => *epochs = num(key, value)?,
                FidBackend::RandomProjection { .. } => return Err(Error::config(key, "only applies to fid_backend = cnn")),
            },
            "fid_samples_per_map" => self.eval.fid_samples_per_map = num(key, value)?,
            "diversity_maps" => self.eval.diversity_maps = num(key, value)?,
            "diversity_pairs" => self.eval.diversity_pairs = num(key, value)?,
            "connectivity_max_lag" => self.eval.connectivity_max_lag = num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "lambdas" => self.lambdas = list(key, value)?,
            "seeds" => self.seeds = list(key, value)?,
            "precision" => {
                self.precision = Precision::parse(value)
                    .ok_or_else(|| Error::config(key, format!("expected f32 or f64, got `{value}`")))?
            }
            "resume" => {
                self.resume = match value {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => return Err(Error::config(key, format!("expected true/false, got `{value}`"))),
                }
            }
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn discriminator_name(&self) -> Result<String> {
        match &self.discriminator {
            Some(d) => Ok(d.clone()),
            None => catalog::discriminator_for(&self.generator)
                .map(str::to_string)
                .ok_or_else(|| Error::config("discriminator", format!("no default pair for `{}`", self.generator))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        catalog::spec(&self.generator).map_err(|e| Error::config("generator", e.to_string()))?;
        catalog::spec(&self.discriminator_name()?).map_err(|e| Error::config("discriminator", e.to_string()))?;
        let d = &self.dataset;
        if matches!(d.kind, DatasetKind::FashionMnist | DatasetKind::Cifar10 | DatasetKind::Texture) && d.path.is_none() {
            return Err(Error::config("dataset_path", format!("required for dataset = {}", d.kind.name())));
        }
        if d.image_size == 0 {
            return Err(Error::config("image_size", "must be >= 1"));
        }
        for (k, n) in [("validation_size", d.validation_size), ("test_size", d.test_size)] {
            if n != 0 && n < 10 {
                return Err(Error::config(k, "need at least 10 images (5 per constraint map plus FID samples)"));
            }
        }
        if self.lambdas.is_empty() {
            return Err(Error::config("lambdas", "grid must not be empty"));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return Err(Error::config("lambdas", format!("invalid value {l}")));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must not be empty"));
        }
        if self.eval.fid_samples_per_map == 0 {
            return Err(Error::config("fid_samples_per_map", "must be >= 1"));
        }
        if let FidBackend::RandomProjection { dim: 0, .. } = self.fid {
            return Err(Error::config("fid_dim", "must be >= 1"));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line, "expected `key = value`"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Fully resolved config; parsing it gives back an equal value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let d = &self.dataset;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("dataset", d.kind.name().into());
        if let Some(p) = &d.path {
            kv("dataset_path", p.display().to_string());
        }
        kv("image_size", d.image_size.to_string());
        kv("train_size", d.train_size.to_string());
        kv("validation_size", d.validation_size.to_string());
        kv("test_size", d.test_size.to_string());
        kv("data_seed", d.seed.to_string());
        kv("generator", self.generator.clone());
        if let Some(dn) = &self.discriminator {
            kv("discriminator", dn.clone());
        }
        kv("fid_backend", self.fid.kind_name().into());
        match self.fid {
            FidBackend::RandomProjection { dim, seed } => {
                kv("fid_dim", dim.to_string());
                kv("fid_seed", seed.to_string());
            }
            FidBackend::Classifier { epochs, seed } => {
                kv("classifier_epochs", epochs.to_string());
                kv("fid_seed", seed.to_string());
            }
        }
        kv("fid_samples_per_map", self.eval.fid_samples_per_map.to_string());
        kv("diversity_maps", self.eval.diversity_maps.to_string());
        kv("diversity_pairs", self.eval.diversity_pairs.to_string());
        kv("connectivity_max_lag", self.eval.connectivity_max_lag.to_string());
        kv("out", self.out.display().to_string());
        kv("lambdas", join(&self.lambdas));
        kv("seeds", join(&self.seeds));
        kv("precision", self.precision.name().into());
        kv("resume", self.resume.to_string());
        for (k, v) in self.train.entries() {
            kv(k, v);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_text_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("lambdas", "0, 0.5,10").unwrap();
        cfg.set("fid_backend", "cnn").unwrap();
        cfg.set("classifier_epochs", "3").unwrap();
        cfg.set("lambda", "2.5").unwrap();
        cfg.set("dataset_path", "/tmp/x").unwrap();
        assert_eq!(cfg.lambdas, vec![0.0, 0.5, 10.0]);
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_names_the_key() {
        match ExperimentConfig::parse("epochs = 2\nlamda = 1\n") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "lamda"),
            other => panic!("{other:?}"),
        }
        assert!(ExperimentConfig::parse("generator = nope").is_err());
        assert!(ExperimentConfig::parse("dataset = cifar10").is_err());
        assert!(ExperimentConfig::parse("lambdas = ").is_err());
        assert!(ExperimentConfig::parse("fid_dim = 3\nfid_backend = cnn\nclassifier_epochs = x").is_err());
    }
}
