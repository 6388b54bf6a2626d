//! Architecture files shipped with the crate.

use super::arch::ArchSpec;
use crate::error::{Error, Result};

macro_rules! entries {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../catalog/", $name, ".arch")))),*]
    };
}

const FILES: &[(&str, &str)] = entries![
    "dcgan_fashion",
    "dcgan_fashion_d",
    "unetres_cifar",
    "unetres_cifar_d",
    "unetres_celeba",
    "unetres_celeba_d",
    "patchgan_texture_d",
    "updil_texture",
    "upencdec_texture",
    "unet_texture",
    "res_texture",
    "unetres_texture",
    "dcgan_desk16",
    "dcgan_desk16_d",
];

/// Generator name and the discriminator it is trained against.
pub const PAIRS: &[(&str, &str)] = &[
    ("dcgan_fashion", "dcgan_fashion_d"),
    ("unetres_cifar", "unetres_cifar_d"),
    ("unetres_celeba", "unetres_celeba_d"),
    ("updil_texture", "patchgan_texture_d"),
    ("upencdec_texture", "patchgan_texture_d"),
    ("unet_texture", "patchgan_texture_d"),
    ("res_texture", "patchgan_texture_d"),
    ("unetres_texture", "patchgan_texture_d"),
    ("dcgan_desk16", "dcgan_desk16_d"),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    FILES.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parses and validates a catalog entry.
pub fn spec(name: &str) -> Result<ArchSpec> {
    let text = source(name).ok_or_else(|| Error::invalid(format!("unknown architecture `{name}`")))?;
    let spec = ArchSpec::parse(text, &format!("{name}.arch"))?;
    spec.validate()?;
    Ok(spec)
}

/// Discriminator paired with a generator.
pub fn discriminator_for(generator: &str) -> Option<&'static str> {
    PAIRS.iter().find(|(g, _)| *g == generator).map(|(_, d)| *d)
}
