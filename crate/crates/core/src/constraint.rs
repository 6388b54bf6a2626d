//! Sparse pixel constraints: the map data model, the masking operator,
//! sampling from real images and the additive measurement-noise model.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::{check_dims, ImageTensor};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Default upper bound on mask density for the sparse regime.
pub const DEFAULT_MAX_DENSITY: f64 = 0.05;

/// Known pixel values at a sparse set of spatial locations.
///
/// `values` is `(height, width, channels)` row-major and is exactly zero
/// wherever `mask` is false. A masked location constrains all channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintMap<T> {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<T>,
    mask: Vec<bool>,
}

impl<T: Scalar> ConstraintMap<T> {
    /// Builds a canonical map. Values at unmasked locations must be zero and
    /// all values must lie in `[-1, 1]`.
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        values: Vec<T>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        check_dims(height, width, channels)?;
        if values.len() != height * width * channels {
            return Err(Error::shape(height * width * channels, values.len()));
        }
        if mask.len() != height * width {
            return Err(Error::shape(height * width, mask.len()));
        }
        for (i, px) in values.chunks_exact(channels).enumerate() {
            for &v in px {
                if !(v.abs() <= T::one()) {
                    return Err(Error::invalid(format!("constraint value {v} outside [-1, 1]")));
                }
                if !mask[i] && v != T::zero() {
                    return Err(Error::invalid(format!(
                        "non-zero value at unmasked location ({}, {})",
                        i / width,
                        i % width
                    )));
                }
            }
        }
        Ok(ConstraintMap {
            height,
            width,
            channels,
            values,
            mask,
        })
    }

    pub fn empty(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![T::zero(); height * width * channels],
            vec![false; height * width],
        )
    }

    /// Builds a map from `(row, col, values)` entries.
    pub fn from_entries(
        height: usize,
        width: usize,
        channels: usize,
        entries: &[(usize, usize, Vec<T>)],
    ) -> Result<Self> {
        check_dims(height, width, channels)?;
        let mut values = vec![T::zero(); height * width * channels];
        let mut mask = vec![false; height * width];
        for (r, c, v) in entries {
            if *r >= height || *c >= width {
                return Err(Error::invalid(format!("location ({r}, {c}) out of range")));
            }
            if v.len() != channels {
                return Err(Error::shape(channels, v.len()));
            }
            let i = r * width + c;
            mask[i] = true;
            values[i * channels..(i + 1) * channels].copy_from_slice(v);
        }
        Self::new(height, width, channels, values, mask)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn is_masked(&self, y: usize, x: usize) -> bool {
        self.mask[y * self.width + x]
    }

    #[inline]
    pub fn value(&self, y: usize, x: usize, c: usize) -> T {
        self.values[(y * self.width + x) * self.channels + c]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Fraction of spatial locations that are constrained.
    pub fn density(&self) -> f64 {
        self.count() as f64 / (self.height * self.width) as f64
    }

    /// Masked locations in row-major order.
    pub fn locations(&self) -> Vec<(usize, usize)> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| (i / self.width, i % self.width))
            .collect()
    }

    /// The dense view `y`.
    pub fn dense(&self) -> ImageTensor<T> {
        ImageTensor::new(self.height, self.width, self.channels, self.values.clone())
            .expect("canonical map is a valid image")
    }

    pub fn check_sparse(&self, max_density: f64) -> Result<()> {
        let d = self.density();
        if d > max_density {
            return Err(Error::invalid(format!(
                "mask density {d:.6} exceeds sparse-regime limit {max_density}"
            )));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ConstraintMap<U> {
        ConstraintMap {
            height: self.height,
            width: self.width,
            channels: self.channels,
            values: self.values.iter().map(|v| U::of(v.f64())).collect(),
            mask: self.mask.clone(),
        }
    }
}

/// Gaussian measurement noise on the constrained values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(NoiseSpec { sigma, seed })
    }

    pub fn none() -> Self {
        NoiseSpec { sigma: 0.0, seed: 0 }
    }
}

/// Number of locations constrained at a given density: `max(1, round(d * n * p))`.
pub fn constraint_count(height: usize, width: usize, density: f64) -> usize {
    let total = height * width;
    ((density * total as f64).round() as usize).clamp(1, total.max(1))
}

/// Picks `constraint_count` distinct locations uniformly at random and copies
/// every channel of `image` there.
pub fn sample_constraint_map<T: Scalar, R: Rng + ?Sized>(
    image: &ImageTensor<T>,
    density: f64,
    rng: &mut R,
) -> Result<ConstraintMap<T>> {
    let (h, w, c) = image.shape();
    if h * w == 0 {
        return Err(Error::invalid("degenerate image"));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::invalid(format!("density must be in (0, 1], got {density}")));
    }
    let k = constraint_count(h, w, density);
    let mut picked = rand::seq::index::sample(rng, h * w, k).into_vec();
    picked.sort_unstable();
    let mut values = vec![T::zero(); h * w * c];
    let mut mask = vec![false; h * w];
    for i in picked {
        mask[i] = true;
        let (y, x) = (i / w, i % w);
        for ch in 0..c {
            values[i * c + ch] = image.get(y, x, ch);
        }
    }
    ConstraintMap::new(h, w, c, values, mask)
}

/// `M(y) ⊙ image`: image values at masked locations, zero elsewhere.
pub fn apply_mask<T: Scalar>(map: &ConstraintMap<T>, image: &ImageTensor<T>) -> Result<ImageTensor<T>> {
    if map.shape() != image.shape() {
        return Err(Error::shape(map.shape(), image.shape()));
    }
    let c = map.channels;
    let data = image
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| if map.mask[i / c] { v } else { T::zero() })
        .collect();
    ImageTensor::new(map.height, map.width, c, data)
}

/// Adds i.i.d. `N(0, sigma^2)` noise to the masked values and clips to
/// `[-1, 1]`. Unmasked locations stay exactly zero.
pub fn add_measurement_noise<T: Scalar>(
    map: &ConstraintMap<T>,
    noise: NoiseSpec,
) -> Result<ConstraintMap<T>> {
    use rand::SeedableRng;
    if noise.sigma == 0.0 {
        return Ok(map.clone());
    }
    let normal = Normal::new(0.0, noise.sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(noise.seed);
    let c = map.channels;
    let mut values = map.values.clone();
    for (i, v) in values.iter_mut().enumerate() {
        if map.mask[i / c] {
            let noisy = v.f64() + normal.sample(&mut rng);
            *v = T::of(noisy.clamp(-1.0, 1.0));
        }
    }
    ConstraintMap::new(map.height, map.width, c, values, map.mask.clone())
}

/// Per-location satisfaction: a masked location is satisfied when the mean
/// over channels of the squared error is strictly below `eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct Satisfaction {
    pub fraction: f64,
    /// One flag per masked location, in row-major order.
    pub flags: Vec<bool>,
    pub locations: Vec<(usize, usize)>,
}

pub fn satisfied_fraction<T: Scalar>(
    map: &ConstraintMap<T>,
    image: &ImageTensor<T>,
    eps: f64,
) -> Result<Satisfaction> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps must be > 0, got {eps}")));
    }
    if map.shape() != image.shape() {
        return Err(Error::shape(map.shape(), image.shape()));
    }
    let locations = map.locations();
    if locations.is_empty() {
        return Err(Error::invalid("constraint map has no masked locations"));
    }
    let c = map.channels;
    let flags: Vec<bool> = locations
        .iter()
        .map(|&(y, x)| {
            let se: f64 = (0..c)
                .map(|ch| {
                    let d = map.value(y, x, ch).f64() - image.get(y, x, ch).f64();
                    d * d
                })
                .sum();
            se / (c as f64) < eps
        })
        .collect();
    let ok = flags.iter().filter(|&&f| f).count();
    Ok(Satisfaction {
        fraction: ok as f64 / flags.len() as f64,
        flags,
        locations,
    })
}

/// Generator conditioning input: `c` value channels followed by the binary
/// mask channel, as a `[c + 1, 1, h, w]` tensor.
pub fn encode_for_generator<T: Scalar>(map: &ConstraintMap<T>) -> Tensor<T> {
    encode_batch(std::slice::from_ref(map)).expect("single map batch")
}

/// Batched [`encode_for_generator`]: `[c + 1, n, h, w]`.
pub fn encode_batch<T: Scalar>(maps: &[ConstraintMap<T>]) -> Result<Tensor<T>> {
    let first = maps.first().ok_or(Error::EmptyBatch)?;
    let (h, w, c) = first.shape();
    let n = maps.len();
    let mut t = Tensor::zeros([c + 1, n, h, w]);
    for (b, m) in maps.iter().enumerate() {
        if m.shape() != (h, w, c) {
            return Err(Error::shape((h, w, c), m.shape()));
        }
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                for ch in 0..c {
                    let idx = t.index(ch, b, y, x);
                    t.data_mut()[idx] = m.values[i * c + ch];
                }
                if m.mask[i] {
                    let idx = t.index(c, b, y, x);
                    t.data_mut()[idx] = T::one();
                }
            }
        }
    }
    Ok(t)
}

/// Dense values of a batch of maps, `[c, n, h, w]` (no mask channel).
pub fn dense_batch<T: Scalar>(maps: &[ConstraintMap<T>]) -> Result<Tensor<T>> {
    let t = encode_batch(maps)?;
    let c = t.channels() - 1;
    Ok(t.split_channels(&[c, 1])?.swap_remove(0))
}

/// Inverse of [`encode_for_generator`] for a single-sample tensor.
pub fn decode_conditioning<T: Scalar>(t: &Tensor<T>) -> Result<ConstraintMap<T>> {
    let [cc, n, h, w] = t.shape();
    if n != 1 || cc < 2 {
        return Err(Error::shape("[c+1, 1, h, w]", t.shape()));
    }
    let c = cc - 1;
    let mut values = vec![T::zero(); h * w * c];
    let mut mask = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let m = t.at(c, 0, y, x);
            if m == T::one() {
                mask[y * w + x] = true;
            } else if m != T::zero() {
                return Err(Error::invalid("mask channel must be binary"));
            }
            for ch in 0..c {
                values[(y * w + x) * c + ch] = t.at(ch, 0, y, x);
            }
        }
    }
    ConstraintMap::new(h, w, c, values, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, c: usize, seed: u64) -> ImageTensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..h * w * c).map(|_| rng.random_range(-1.0..=1.0)).collect();
        ImageTensor::new(h, w, c, data).unwrap()
    }

    #[test]
    fn fashion_density_gives_four_pixels() {
        let img = random_image(28, 28, 1, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = sample_constraint_map(&img, 0.005, &mut rng).unwrap();
        assert_eq!(m.count(), 4);
    }

    #[test]
    fn full_density_copies_image() {
        let img = random_image(5, 7, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = sample_constraint_map(&img, 1.0, &mut rng).unwrap();
        assert!(m.mask().iter().all(|&b| b));
        assert_eq!(m.values(), img.data());
    }

    #[test]
    fn sampling_is_deterministic() {
        let img = random_image(16, 16, 3, 4);
        let a = sample_constraint_map(&img, 0.05, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_constraint_map(&img, 0.05, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn count_rule_across_densities() {
        let img = random_image(40, 25, 1, 5);
        for d in [0.001, 0.005, 0.01, 0.05] {
            let m = sample_constraint_map(&img, d, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
            let want = ((d * 1000.0f64).round() as usize).max(1);
            assert_eq!(m.count(), want, "density {d}");
        }
    }

    #[test]
    fn rejects_bad_density() {
        let img = random_image(4, 4, 1, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_constraint_map(&img, 0.0, &mut rng).is_err());
        assert!(sample_constraint_map(&img, 1.5, &mut rng).is_err());
    }

    #[test]
    fn mask_identity_and_null() {
        let img = random_image(6, 6, 3, 7);
        let full = sample_constraint_map(&img, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(apply_mask(&full, &img).unwrap(), img);
        let none = ConstraintMap::empty(6, 6, 3).unwrap();
        assert!(apply_mask(&none, &img).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn apply_mask_matches_loop() {
        let img = random_image(8, 8, 3, 8);
        let src = random_image(8, 8, 3, 9);
        let m = sample_constraint_map(&src, 0.3, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        let out = apply_mask(&m, &img).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                for c in 0..3 {
                    let want = if m.is_masked(y, x) { img.get(y, x, c) } else { 0.0 };
                    assert_eq!(out.get(y, x, c), want);
                }
            }
        }
    }

    #[test]
    fn apply_mask_shape_mismatch() {
        let img = random_image(8, 8, 3, 8);
        let m = ConstraintMap::<f64>::empty(8, 8, 1).unwrap();
        assert!(apply_mask(&m, &img).is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let img = random_image(10, 10, 3, 11);
        let m = sample_constraint_map(&img, 0.1, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        assert_eq!(add_measurement_noise(&m, NoiseSpec::none()).unwrap(), m);
    }

    #[test]
    fn noise_std_and_mask_invariance() {
        let mask = vec![true; 100 * 100];
        let m = ConstraintMap::<f64>::new(100, 100, 1, vec![0.0; 10_000], mask).unwrap();
        let noisy = add_measurement_noise(&m, NoiseSpec::new(0.1, 42).unwrap()).unwrap();
        let v = noisy.values();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        let sd = var.sqrt();
        assert!((0.095..=0.105).contains(&sd), "sample std {sd}");

        let img = random_image(12, 12, 3, 13);
        let sparse = sample_constraint_map(&img, 0.05, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let noisy = add_measurement_noise(&sparse, NoiseSpec::new(0.5, 1).unwrap()).unwrap();
        assert_eq!(noisy.mask(), sparse.mask());
        for (i, px) in noisy.values().chunks(3).enumerate() {
            if !sparse.mask()[i] {
                assert!(px.iter().all(|&v| v == 0.0));
            } else {
                assert!(px.iter().all(|v| v.abs() <= 1.0));
            }
        }
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(NoiseSpec::new(-0.1, 0).is_err());
    }

    #[test]
    fn satisfaction_cases() {
        let img = random_image(6, 6, 3, 14);
        let m = sample_constraint_map(&img, 0.2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(satisfied_fraction(&m, &img, 0.1).unwrap().fraction, 1.0);

        let m = ConstraintMap::from_entries(1, 1, 1, &[(0, 0, vec![1.0f64])]).unwrap();
        let g = ImageTensor::new(1, 1, 1, vec![0.5]).unwrap();
        assert_eq!(satisfied_fraction(&m, &g, 0.1).unwrap().fraction, 0.0);

        let empty = ConstraintMap::<f64>::empty(1, 1, 1).unwrap();
        assert!(satisfied_fraction(&empty, &g, 0.1).is_err());
        assert!(satisfied_fraction(&m, &g, 0.0).is_err());
    }

    #[test]
    fn satisfaction_boundary_is_strict() {
        // squared error exactly 0.25 against eps 0.25
        let m = ConstraintMap::from_entries(1, 2, 1, &[(0, 1, vec![0.5f64])]).unwrap();
        let g = ImageTensor::new(1, 2, 1, vec![0.0, 0.0]).unwrap();
        assert!(!satisfied_fraction(&m, &g, 0.25).unwrap().flags[0]);
    }

    #[test]
    fn satisfaction_matches_loop() {
        let img = random_image(16, 16, 3, 15);
        let gen = random_image(16, 16, 3, 16);
        let m = sample_constraint_map(&img, 0.2, &mut ChaCha8Rng::seed_from_u64(17)).unwrap();
        let s = satisfied_fraction(&m, &gen, 0.3).unwrap();
        let mut total = 0;
        let mut ok = 0;
        for y in 0..16 {
            for x in 0..16 {
                if !m.is_masked(y, x) {
                    continue;
                }
                total += 1;
                let mut se = 0.0;
                for c in 0..3 {
                    se += (m.value(y, x, c) - gen.get(y, x, c)).powi(2);
                }
                if se / 3.0 < 0.3 {
                    ok += 1;
                }
            }
        }
        assert_eq!(s.flags.len(), total);
        assert_eq!(s.fraction, ok as f64 / total as f64);
    }

    #[test]
    fn encode_shapes_and_empty() {
        let m = ConstraintMap::<f32>::empty(28, 28, 1).unwrap();
        let t = encode_for_generator(&m);
        assert_eq!(t.shape(), [2, 1, 28, 28]);
        assert!(t.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn encode_decode_round_trip() {
        for seed in 0..100 {
            let c = if seed % 2 == 0 { 1 } else { 3 };
            let img = random_image(9, 7, c, seed);
            let m = sample_constraint_map(&img, 0.05 + (seed as f64) / 200.0, &mut ChaCha8Rng::seed_from_u64(seed))
                .unwrap();
            assert_eq!(decode_conditioning(&encode_for_generator(&m)).unwrap(), m);
        }
    }

    #[test]
    fn non_canonical_map_rejected() {
        assert!(ConstraintMap::new(1, 2, 1, vec![0.3f64, 0.0], vec![false, true]).is_err());
    }
}
