use crate::constraint::NoiseSpec;
use crate::error::{Error, Result};
use crate::nn::OptimizerKind;
use crate::objectives::{GeneratorLossKind, LatentDistribution};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerChoice {
    Adam,
    Sgd,
}

/// Hyperparameters of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Weight of the reconstruction term.
    pub lambda: f64,
    pub constraint_density: f64,
    pub noise: NoiseSpec,
    pub latent_distribution: LatentDistribution,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerChoice,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// 1 for plain training, 2 for packed discriminator training.
    pub pac: usize,
    pub loss_variant: GeneratorLossKind,
    /// Feed the dense constraint values to the discriminator as well.
    pub conditional_d: bool,
    /// Standard deviation of Gaussian noise added to discriminator inputs,
    /// decayed linearly to zero over the run.
    pub d_input_noise: f64,
    /// Pack two generator samples in the generator step of packed training.
    pub pac_g_step: bool,
    /// When false the reconstruction term is reported but never
    /// backpropagated.
    pub use_reconstruction: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1.0,
            constraint_density: 0.005,
            noise: NoiseSpec::none(),
            latent_distribution: LatentDistribution::Uniform,
            batch_size: 64,
            epochs: 10,
            optimizer: OptimizerChoice::Adam,
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            pac: 1,
            loss_variant: GeneratorLossKind::Saturating,
            conditional_d: false,
            d_input_noise: 0.0,
            pac_g_step: true,
            use_reconstruction: true,
            seed: 0,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "lambda",
    "density",
    "noise_sigma",
    "noise_seed",
    "latent",
    "batch_size",
    "epochs",
    "optimizer",
    "learning_rate",
    "beta1",
    "beta2",
    "pac",
    "loss",
    "conditional_d",
    "d_input_noise",
    "pac_g_step",
    "reconstruction",
    "seed",
];

fn num<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected true/false, got `{value}`"))),
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::config("lambda", format!("must be a finite value >= 0, got {}", self.lambda)));
        }
        if !(self.constraint_density > 0.0 && self.constraint_density <= 1.0) {
            return Err(Error::config("density", "must lie in (0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        if !(1..=2).contains(&self.pac) {
            return Err(Error::config("pac", format!("must be 1 or 2, got {}", self.pac)));
        }
        if self.pac == 2 && self.conditional_d {
            return Err(Error::config("conditional_d", "not supported with pac = 2"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be > 0"));
        }
        for (k, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(k, "must lie in [0, 1)"));
            }
        }
        if !(self.d_input_noise >= 0.0) {
            return Err(Error::config("d_input_noise", "must be >= 0"));
        }
        if !(self.noise.sigma >= 0.0) {
            return Err(Error::config("noise_sigma", "must be >= 0"));
        }
        Ok(())
    }

    pub fn optimizer_kind(&self) -> OptimizerKind {
        match self.optimizer {
            OptimizerChoice::Adam => OptimizerKind::Adam {
                beta1: self.beta1,
                beta2: self.beta2,
                eps: 1e-8,
            },
            OptimizerChoice::Sgd => OptimizerKind::Sgd,
        }
    }

    /// Sets one key. Returns `Ok(false)` when the key is not a training key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "lambda" => self.lambda = num(key, value)?,
            "density" => self.constraint_density = num(key, value)?,
            "noise_sigma" => self.noise.sigma = num(key, value)?,
            "noise_seed" => self.noise.seed = num(key, value)?,
            "latent" => {
                self.latent_distribution = LatentDistribution::parse(value)
                    .ok_or_else(|| Error::config(key, format!("unknown distribution `{value}`")))?
            }
            "batch_size" => self.batch_size = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "optimizer" => {
                self.optimizer = match value {
                    "adam" => OptimizerChoice::Adam,
                    "sgd" => OptimizerChoice::Sgd,
                    _ => return Err(Error::config(key, format!("unknown optimizer `{value}`"))),
                }
            }
            "learning_rate" => self.learning_rate = num(key, value)?,
            "beta1" => self.beta1 = num(key, value)?,
            "beta2" => self.beta2 = num(key, value)?,
            "pac" => self.pac = num(key, value)?,
            "loss" => {
                self.loss_variant = GeneratorLossKind::parse(value)
                    .ok_or_else(|| Error::config(key, format!("unknown loss `{value}`")))?
            }
            "conditional_d" => self.conditional_d = flag(key, value)?,
            "d_input_noise" => self.d_input_noise = num(key, value)?,
            "pac_g_step" => self.pac_g_step = flag(key, value)?,
            "reconstruction" => self.use_reconstruction = flag(key, value)?,
            "seed" => self.seed = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// `(key, value)` pairs that [`TrainConfig::set`] reads back exactly.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("lambda", self.lambda.to_string()),
            ("density", self.constraint_density.to_string()),
            ("noise_sigma", self.noise.sigma.to_string()),
            ("noise_seed", self.noise.seed.to_string()),
            ("latent", self.latent_distribution.name().to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            (
                "optimizer",
                match self.optimizer {
                    OptimizerChoice::Adam => "adam",
                    OptimizerChoice::Sgd => "sgd",
                }
                .to_string(),
            ),
            ("learning_rate", self.learning_rate.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("pac", self.pac.to_string()),
            ("loss", self.loss_variant.name().to_string()),
            ("conditional_d", self.conditional_d.to_string()),
            ("d_input_noise", self.d_input_noise.to_string()),
            ("pac_g_step", self.pac_g_step.to_string()),
            ("reconstruction", self.use_reconstruction.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line, "expected `key = value`"))?;
            let k = k.trim();
            if !cfg.set(k, v.trim())? {
                return Err(Error::config(k, "unknown key"));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
