use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{DatasetConfig, DatasetKind};
use crate::constraint::{add_measurement_noise, NoiseSpec};
use crate::data::io::{load_image, parse_cifar_batch, read_idx_images, read_idx_labels};
use crate::data::{brick_wall, carve_validation, sample_texture_patches, split_with_constraint_sets, two_shapes};
use crate::data::{DatasetSplit, RawSplits, Sample};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::scalar::Scalar;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn samples<T>(images: Vec<ImageTensor<T>>, labels: Option<Vec<usize>>, first_id: usize) -> Vec<Sample<T>> {
    let mut labels = labels.map(|l| l.into_iter());
    images
        .into_iter()
        .enumerate()
        .map(|(i, image)| Sample {
            id: first_id + i,
            image,
            label: labels.as_mut().and_then(|l| l.next()),
        })
        .collect()
}

fn truncate<T>(mut v: Vec<T>, n: usize) -> Vec<T> {
    if n > 0 {
        v.truncate(n);
    }
    v
}

fn file_backed<T>(
    cfg: &DatasetConfig,
    train: (Vec<ImageTensor<T>>, Vec<usize>),
    test: (Vec<ImageTensor<T>>, Vec<usize>),
) -> Result<RawSplits<T>> {
    let offset = train.0.len();
    let train = truncate(samples(train.0, Some(train.1), 0), cfg.train_size + cfg.validation_size);
    let (train, validation) = carve_validation(train, cfg.validation_size, &mut rng(cfg.seed, 1))?;
    let test = truncate(samples(test.0, Some(test.1), offset), cfg.test_size);
    Ok(RawSplits { train, validation, test })
}

fn idx_pair<T: Scalar>(dir: &Path, prefix: &str) -> Result<(Vec<ImageTensor<T>>, Vec<usize>)> {
    let images = read_idx_images(&dir.join(format!("{prefix}-images-idx3-ubyte")))?;
    let labels = read_idx_labels(&dir.join(format!("{prefix}-labels-idx1-ubyte")))?;
    if images.len() != labels.len() {
        return Err(Error::shape(images.len(), labels.len()));
    }
    Ok((images, labels))
}

fn cifar_files<T: Scalar>(dir: &Path, names: &[String]) -> Result<(Vec<ImageTensor<T>>, Vec<usize>)> {
    let mut out = (Vec::new(), Vec::new());
    for n in names {
        let p = dir.join(n);
        let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
        let (im, lb) = parse_cifar_batch(&bytes)?;
        out.0.extend(im);
        out.1.extend(lb);
    }
    Ok(out)
}

fn patches<T: Scalar>(cfg: &DatasetConfig, source: &ImageTensor<T>) -> Result<RawSplits<T>> {
    let sizes = [cfg.train_size, cfg.validation_size, cfg.test_size];
    let mut parts = Vec::with_capacity(3);
    let mut next_id = 0;
    for (k, &n) in sizes.iter().enumerate() {
        let imgs = sample_texture_patches(source, cfg.image_size, n, &mut rng(cfg.seed, 10 + k as u64))?;
        parts.push(samples(imgs, None, next_id));
        next_id += n;
    }
    let test = parts.pop().expect("three parts");
    let validation = parts.pop().expect("three parts");
    let train = parts.pop().expect("three parts");
    Ok(RawSplits { train, validation, test })
}

/// Image collections for the configured dataset, before constraint maps
/// are drawn. Sample ids are unique across the three collections.
pub fn load_raw<T: Scalar>(cfg: &DatasetConfig) -> Result<RawSplits<T>> {
    let path = || cfg.path.as_deref().ok_or_else(|| Error::config("dataset_path", "missing"));
    match cfg.kind {
        DatasetKind::TwoShapes => {
            let total = cfg.train_size + cfg.validation_size + cfg.test_size;
            let mut all = two_shapes(total, cfg.image_size, &mut rng(cfg.seed, 1))?;
            let test = all.split_off(cfg.train_size + cfg.validation_size);
            let validation = all.split_off(cfg.train_size);
            Ok(RawSplits {
                train: all,
                validation,
                test,
            })
        }
        DatasetKind::FashionMnist => {
            let dir = path()?;
            file_backed(cfg, idx_pair(dir, "train")?, idx_pair(dir, "t10k")?)
        }
        DatasetKind::Cifar10 => {
            let dir = path()?;
            let train: Vec<String> = (1..=5).map(|i| format!("data_batch_{i}.bin")).collect();
            file_backed(
                cfg,
                cifar_files(dir, &train)?,
                cifar_files(dir, &["test_batch.bin".to_string()])?,
            )
        }
        DatasetKind::Texture => {
            let src = load_image(path()?)?;
            patches(cfg, &src)
        }
        DatasetKind::Brick => {
            let side = (cfg.image_size * 4).max(256);
            let src = brick_wall(side, side, &mut rng(cfg.seed, 2))?;
            patches(cfg, &src)
        }
    }
}

/// Loads the dataset, runs the split protocol and applies measurement
/// noise to every constraint map.
pub fn prepare_dataset<T: Scalar>(cfg: &DatasetConfig, density: f64, noise: NoiseSpec) -> Result<DatasetSplit<T>> {
    let raw = load_raw(cfg)?;
    let mut split = split_with_constraint_sets(raw, density, &mut rng(cfg.seed, 3))?;
    if noise.sigma > 0.0 {
        for (k, part) in [&mut split.train, &mut split.validation, &mut split.test].into_iter().enumerate() {
            for (i, c) in part.constraints.iter_mut().enumerate() {
                let seed = noise.seed.wrapping_add(((k as u64) << 40) | i as u64);
                c.map = add_measurement_noise(&c.map, NoiseSpec { sigma: noise.sigma, seed })?;
            }
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn two_shapes_split_sizes_and_ids() {
        let cfg = DatasetConfig {
            kind: DatasetKind::TwoShapes,
            path: None,
            image_size: 12,
            train_size: 50,
            validation_size: 20,
            test_size: 15,
            seed: 3,
        };
        let s = prepare_dataset::<f64>(&cfg, 0.05, NoiseSpec::none()).unwrap();
        assert_eq!((s.train.images.len(), s.train.constraints.len()), (40, 10));
        assert_eq!((s.validation.images.len(), s.validation.constraints.len()), (16, 4));
        assert_eq!((s.test.images.len(), s.test.constraints.len()), (12, 3));
        let ids: HashSet<usize> = s.manifest().iter().map(|e| e.id).collect();
        assert_eq!(ids.len(), 85);
        assert_eq!(s, prepare_dataset::<f64>(&cfg, 0.05, NoiseSpec::none()).unwrap());
    }

    #[test]
    fn noise_moves_only_values() {
        let cfg = DatasetConfig {
            kind: DatasetKind::Brick,
            path: None,
            image_size: 16,
            train_size: 10,
            validation_size: 10,
            test_size: 10,
            seed: 1,
        };
        let clean = prepare_dataset::<f64>(&cfg, 0.05, NoiseSpec::none()).unwrap();
        let noisy = prepare_dataset::<f64>(&cfg, 0.05, NoiseSpec { sigma: 0.1, seed: 4 }).unwrap();
        assert_eq!(clean.train.images, noisy.train.images);
        let (a, b) = (&clean.test.constraints[0].map, &noisy.test.constraints[0].map);
        assert_eq!(a.mask(), b.mask());
        assert_ne!(a.values(), b.values());
    }

    #[test]
    fn missing_files_are_reported() {
        let cfg = DatasetConfig {
            kind: DatasetKind::FashionMnist,
            path: Some("/nonexistent".into()),
            image_size: 28,
            train_size: 0,
            validation_size: 10,
            test_size: 10,
            seed: 0,
        };
        assert!(load_raw::<f32>(&cfg).is_err());
    }
}
