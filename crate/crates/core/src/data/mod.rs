//! Datasets, the split protocol that keeps constraint maps unpaired from the
//! training images, texture patches and synthetic sources.

pub mod io;
pub mod pixcon;

pub use pixcon::{parse_pixcon, read_constraint_file, to_pixcon, write_constraint_file};

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::constraint::{sample_constraint_map, ConstraintMap};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::metrics::Split;
use crate::scalar::Scalar;

pub const TEXTURE_PATCH: usize = 160;

#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub id: usize,
    pub image: ImageTensor<T>,
    pub label: Option<usize>,
}

/// A constraint map with the id of the image it was drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint<T> {
    pub map: ConstraintMap<T>,
    pub source_id: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitPart<T> {
    pub images: Vec<Sample<T>>,
    pub constraints: Vec<Constraint<T>>,
}

impl<T: Scalar> SplitPart<T> {
    pub fn maps(&self) -> Vec<ConstraintMap<T>> {
        self.constraints.iter().map(|c| c.map.clone()).collect()
    }

    pub fn images(&self) -> Vec<ImageTensor<T>> {
        self.images.iter().map(|s| s.image.clone()).collect()
    }
}

/// Image collections before constraint sampling.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawSplits<T> {
    pub train: Vec<Sample<T>>,
    pub validation: Vec<Sample<T>>,
    pub test: Vec<Sample<T>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetSplit<T> {
    pub train: SplitPart<T>,
    pub validation: SplitPart<T>,
    pub test: SplitPart<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManifestRole {
    Image,
    Constraint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: usize,
    pub split: Split,
    pub role: ManifestRole,
}

impl<T: Scalar> DatasetSplit<T> {
    pub fn part(&self, split: Split) -> &SplitPart<T> {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        let mut out = Vec::new();
        for split in [Split::Train, Split::Validation, Split::Test] {
            let p = self.part(split);
            out.extend(p.images.iter().map(|s| ManifestEntry {
                id: s.id,
                split,
                role: ManifestRole::Image,
            }));
            out.extend(p.constraints.iter().map(|c| ManifestEntry {
                id: c.source_id,
                split,
                role: ManifestRole::Constraint,
            }));
        }
        out
    }
}

/// Moves `n` uniformly chosen images from `train` into a validation set.
pub fn carve_validation<T, R: Rng + ?Sized>(train: Vec<Sample<T>>, n: usize, rng: &mut R) -> Result<(Vec<Sample<T>>, Vec<Sample<T>>)> {
    if n > train.len() {
        return Err(Error::invalid(format!("cannot carve {n} validation images from {}", train.len())));
    }
    let mut picked = vec![false; train.len()];
    for i in sample(rng, train.len(), n) {
        picked[i] = true;
    }
    let (mut keep, mut val) = (Vec::new(), Vec::new());
    for (s, p) in train.into_iter().zip(picked) {
        if p {
            val.push(s);
        } else {
            keep.push(s);
        }
    }
    Ok((keep, val))
}

/// Draws `⌊len/5⌋` images uniformly without replacement, turns each into a
/// constraint map and removes it from the collection.
pub fn split_part<T: Scalar, R: Rng + ?Sized>(images: Vec<Sample<T>>, density: f64, rng: &mut R) -> Result<SplitPart<T>> {
    if images.len() < 5 {
        return Err(Error::invalid(format!("split needs at least 5 images, got {}", images.len())));
    }
    let k = images.len() / 5;
    let mut chosen = sample(rng, images.len(), k).into_vec();
    chosen.sort_unstable();
    let mut part = SplitPart::default();
    let mut next = chosen.iter().peekable();
    let mut sources = Vec::with_capacity(k);
    for (i, s) in images.into_iter().enumerate() {
        if next.peek() == Some(&&i) {
            next.next();
            sources.push(s);
        } else {
            part.images.push(s);
        }
    }
    for s in sources {
        part.constraints.push(Constraint {
            map: sample_constraint_map(&s.image, density, rng)?,
            source_id: s.id,
        });
    }
    Ok(part)
}

pub fn split_with_constraint_sets<T: Scalar, R: Rng + ?Sized>(raw: RawSplits<T>, density: f64, rng: &mut R) -> Result<DatasetSplit<T>> {
    Ok(DatasetSplit {
        train: split_part(raw.train, density, rng)?,
        validation: split_part(raw.validation, density, rng)?,
        test: split_part(raw.test, density, rng)?,
    })
}

/// Manifest text: one `id split role` line per image or constraint source.
pub fn write_manifest(entries: &[ManifestEntry]) -> String {
    let mut s = String::from("# constraint maps are drawn after the validation carve-out\n");
    for e in entries {
        let role = match e.role {
            ManifestRole::Image => "image",
            ManifestRole::Constraint => "constraint",
        };
        let _ = writeln!(s, "{} {} {}", e.id, e.split, role);
    }
    s
}

pub fn parse_manifest(text: &str, source_name: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            source_name: source_name.to_string(),
            line: i + 1,
            msg,
        };
        let cols: Vec<&str> = line.split_whitespace().collect();
        let [id, split, role] = cols[..] else {
            return Err(err(format!("expected 3 columns, found {}", cols.len())));
        };
        out.push(ManifestEntry {
            id: id.parse().map_err(|_| err(format!("bad id `{id}`")))?,
            split: Split::parse(split).ok_or_else(|| err(format!("bad split `{split}`")))?,
            role: match role {
                "image" => ManifestRole::Image,
                "constraint" => ManifestRole::Constraint,
                _ => return Err(err(format!("bad role `{role}`"))),
            },
        });
    }
    Ok(out)
}

/// `count` square patches at uniformly random offsets.
pub fn sample_texture_patches<T: Scalar, R: Rng + ?Sized>(
    source: &ImageTensor<T>,
    patch: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<ImageTensor<T>>> {
    let (h, w, c) = source.shape();
    if patch == 0 || h < patch || w < patch {
        return Err(Error::invalid(format!("{h}x{w} source is smaller than a {patch}x{patch} patch")));
    }
    (0..count)
        .map(|_| {
            let y0 = rng.random_range(0..=h - patch);
            let x0 = rng.random_range(0..=w - patch);
            let mut data = Vec::with_capacity(patch * patch * c);
            for y in y0..y0 + patch {
                let row = (y * w + x0) * c;
                data.extend_from_slice(&source.data()[row..row + patch * c]);
            }
            ImageTensor::new(patch, patch, c, data)
        })
        .collect()
}

/// Labelled grayscale images of a filled square (label 0) or disc (label 1)
/// on a dark background, with random size, position and brightness.
pub fn two_shapes<T: Scalar, R: Rng + ?Sized>(n: usize, size: usize, rng: &mut R) -> Result<Vec<Sample<T>>> {
    if size < 8 {
        return Err(Error::invalid("two-shape images need size >= 8"));
    }
    (0..n)
        .map(|id| {
            let label = rng.random_range(0..2usize);
            let r = rng.random_range(size as f64 / 6.0..size as f64 / 3.0);
            let cy = rng.random_range(r..size as f64 - r);
            let cx = rng.random_range(r..size as f64 - r);
            let fg = rng.random_range(0.3..1.0);
            let image = ImageTensor::from_fn(size, size, 1, |y, x, _| {
                let (dy, dx) = (y as f64 + 0.5 - cy, x as f64 + 0.5 - cx);
                let inside = if label == 0 {
                    dy.abs() <= r && dx.abs() <= r
                } else {
                    dy * dy + dx * dx <= r * r
                };
                T::of(if inside { fg } else { -1.0 })
            })?;
            Ok(Sample {
                id,
                image,
                label: Some(label),
            })
        })
        .collect()
}

/// Synthetic colour brick wall: staggered bricks of random reddish tone
/// separated by light mortar, with pixel noise.
pub fn brick_wall<T: Scalar, R: Rng + ?Sized>(height: usize, width: usize, rng: &mut R) -> Result<ImageTensor<T>> {
    const BW: usize = 40;
    const BH: usize = 18;
    const MORTAR: usize = 3;
    let rows = height / BH + 1;
    let cols = width / BW + 2;
    let tones: Vec<[f64; 3]> = (0..rows * cols)
        .map(|_| {
            let t = rng.random_range(-0.15..0.15);
            [0.25 + t, -0.45 + t, -0.6 + t]
        })
        .collect();
    let noise = Normal::new(0.0, 0.05).expect("positive std");
    let mut data = Vec::with_capacity(height * width * 3);
    for y in 0..height {
        let row = y / BH;
        let shift = if row % 2 == 1 { BW / 2 } else { 0 };
        for x in 0..width {
            let xs = x + shift;
            let mortar = y % BH < MORTAR || xs % BW < MORTAR;
            let base = if mortar { [0.55, 0.5, 0.45] } else { tones[row * cols + xs / BW] };
            for b in base {
                data.push(T::of((b + noise.sample(rng)).clamp(-1.0, 1.0)));
            }
        }
    }
    ImageTensor::new(height, width, 3, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn samples(n: usize, offset: usize) -> Vec<Sample<f64>> {
        (0..n)
            .map(|i| Sample {
                id: offset + i,
                image: ImageTensor::from_fn(8, 8, 1, |y, x, _| ((y + x + i) % 5) as f64 / 5.0).unwrap(),
                label: None,
            })
            .collect()
    }

    #[test]
    fn fifth_of_each_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let raw = RawSplits {
            train: samples(50, 0),
            validation: samples(12, 100),
            test: samples(5, 200),
        };
        let s = split_with_constraint_sets(raw, 0.05, &mut rng).unwrap();
        assert_eq!((s.train.images.len(), s.train.constraints.len()), (40, 10));
        assert_eq!((s.validation.images.len(), s.validation.constraints.len()), (10, 2));
        assert_eq!((s.test.images.len(), s.test.constraints.len()), (4, 1));
        let kept: HashSet<usize> = [&s.train, &s.validation, &s.test].iter().flat_map(|p| p.images.iter().map(|i| i.id)).collect();
        assert!(s.manifest().iter().filter(|e| e.role == ManifestRole::Constraint).all(|e| !kept.contains(&e.id)));
        assert!(split_part(samples(4, 0), 0.05, &mut rng).is_err());
    }

    #[test]
    fn split_is_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            split_part(samples(30, 0), 0.1, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn manifest_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (train, val) = carve_validation(samples(20, 0), 6, &mut rng).unwrap();
        assert_eq!((train.len(), val.len()), (14, 6));
        let s = split_with_constraint_sets(
            RawSplits {
                train,
                validation: val,
                test: samples(5, 50),
            },
            0.05,
            &mut rng,
        )
        .unwrap();
        let m = s.manifest();
        assert_eq!(m.len(), 25);
        assert_eq!(parse_manifest(&write_manifest(&m), "m").unwrap(), m);
        assert!(parse_manifest("1 train bogus\n", "m").is_err());
    }

    #[test]
    fn patches() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = brick_wall::<f32, _>(170, 200, &mut rng).unwrap();
        let p = sample_texture_patches(&src, 160, 5, &mut rng).unwrap();
        assert!(p.iter().all(|i| i.shape() == (160, 160, 3)));
        let exact = brick_wall::<f32, _>(160, 160, &mut rng).unwrap();
        let same = sample_texture_patches(&exact, 160, 3, &mut rng).unwrap();
        assert!(same.iter().all(|i| *i == exact));
        assert!(sample_texture_patches(&exact, 161, 1, &mut rng).is_err());
    }

    #[test]
    fn two_shapes_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = two_shapes::<f64, _>(64, 16, &mut rng).unwrap();
        assert_eq!(d.len(), 64);
        let ones = d.iter().filter(|s| s.label == Some(1)).count();
        assert!(ones > 16 && ones < 48);
        assert!(d.iter().all(|s| s.image.data().iter().any(|&v| v > 0.0)));
    }
}
