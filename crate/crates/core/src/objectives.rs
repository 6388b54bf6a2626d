//! Adversarial and reconstruction losses, their gradients with respect to
//! network outputs, and the latent prior.
//!
//! All batch reductions are means. Discriminator probabilities are clamped
//! to `[PROB_CLAMP, 1 - PROB_CLAMP]` before taking logarithms; the clamped
//! region has zero gradient.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::constraint::ConstraintMap;
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GeneratorLossKind {
    /// `mean log(1 - D(G))`, minimised.
    #[default]
    Saturating,
    /// `-mean log D(G)`.
    NonSaturating,
}

impl GeneratorLossKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorLossKind::Saturating => "saturating",
            GeneratorLossKind::NonSaturating => "non_saturating",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "saturating" => Some(GeneratorLossKind::Saturating),
            "non_saturating" | "nonsaturating" => Some(GeneratorLossKind::NonSaturating),
            _ => None,
        }
    }
}

/// Loss terms of one generator evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub d_loss: f64,
    pub g_adv: f64,
    pub g_rec: f64,
    pub g_total: f64,
    pub lambda: f64,
}

fn clamp<T: Scalar>(p: T) -> (T, bool) {
    let lo = T::of(PROB_CLAMP);
    let hi = T::one() - lo;
    if p < lo {
        (lo, true)
    } else if p > hi {
        (hi, true)
    } else {
        (p, false)
    }
}

fn nonempty<T>(xs: &[T]) -> Result<()> {
    if xs.is_empty() {
        Err(Error::EmptyBatch)
    } else {
        Ok(())
    }
}

/// `-[mean log d_real + mean log(1 - d_fake)]`.
pub fn discriminator_loss<T: Scalar>(d_real: &[T], d_fake: &[T]) -> Result<T> {
    Ok(discriminator_loss_grad(d_real, d_fake)?.0)
}

/// Discriminator loss with its gradient with respect to each probability.
pub fn discriminator_loss_grad<T: Scalar>(d_real: &[T], d_fake: &[T]) -> Result<(T, Vec<T>, Vec<T>)> {
    nonempty(d_real)?;
    nonempty(d_fake)?;
    let nr = T::of(d_real.len() as f64);
    let nf = T::of(d_fake.len() as f64);
    let mut lr = T::zero();
    let gr = d_real
        .iter()
        .map(|&p| {
            let (q, clipped) = clamp(p);
            lr = lr + q.ln();
            if clipped {
                T::zero()
            } else {
                -T::one() / (nr * q)
            }
        })
        .collect();
    let mut lf = T::zero();
    let gf = d_fake
        .iter()
        .map(|&p| {
            let (q, clipped) = clamp(p);
            lf = lf + (T::one() - q).ln();
            if clipped {
                T::zero()
            } else {
                T::one() / (nf * (T::one() - q))
            }
        })
        .collect();
    Ok((-(lr / nr + lf / nf), gr, gf))
}

pub fn generator_adversarial_loss<T: Scalar>(d_fake: &[T], kind: GeneratorLossKind) -> Result<T> {
    Ok(generator_adversarial_loss_grad(d_fake, kind)?.0)
}

pub fn generator_adversarial_loss_grad<T: Scalar>(d_fake: &[T], kind: GeneratorLossKind) -> Result<(T, Vec<T>)> {
    nonempty(d_fake)?;
    let n = T::of(d_fake.len() as f64);
    let mut sum = T::zero();
    let grad = d_fake
        .iter()
        .map(|&p| {
            let (q, clipped) = clamp(p);
            let g = match kind {
                GeneratorLossKind::Saturating => {
                    sum = sum + (T::one() - q).ln();
                    -T::one() / (n * (T::one() - q))
                }
                GeneratorLossKind::NonSaturating => {
                    sum = sum - q.ln();
                    -T::one() / (n * q)
                }
            };
            if clipped {
                T::zero()
            } else {
                g
            }
        })
        .collect();
    Ok((sum / n, grad))
}

/// `‖y - M(y) ⊙ G‖_F²` for one map.
pub fn reconstruction_loss<T: Scalar>(map: &ConstraintMap<T>, generated: &ImageTensor<T>) -> Result<T> {
    if map.shape() != generated.shape() {
        return Err(Error::shape(map.shape(), generated.shape()));
    }
    let c = map.channels();
    let mut s = T::zero();
    for (i, &m) in map.mask().iter().enumerate() {
        if m {
            for k in 0..c {
                let d = map.values()[i * c + k] - generated.data()[i * c + k];
                s = s + d * d;
            }
        }
    }
    Ok(s)
}

/// Mean of [`reconstruction_loss`] over aligned lists.
pub fn reconstruction_loss_batch<T: Scalar>(maps: &[ConstraintMap<T>], generated: &[ImageTensor<T>]) -> Result<T> {
    nonempty(maps)?;
    if maps.len() != generated.len() {
        return Err(Error::shape(maps.len(), generated.len()));
    }
    let mut s = T::zero();
    for (m, g) in maps.iter().zip(generated) {
        s = s + reconstruction_loss(m, g)?;
    }
    Ok(s / T::of(maps.len() as f64))
}

/// Batched reconstruction loss on network tensors. `conditioning` is the
/// generator encoding `[c+1, n, h, w]` (values then mask), `generated` is
/// `[c, n, h, w]`. Returns the batch mean and its gradient with respect to
/// `generated`.
pub fn reconstruction_loss_tensor<T: Scalar>(conditioning: &Tensor<T>, generated: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    let [c1, n, h, w] = conditioning.shape();
    let [c, gn, gh, gw] = generated.shape();
    if c1 != c + 1 || (n, h, w) != (gn, gh, gw) {
        return Err(Error::shape(conditioning.shape(), generated.shape()));
    }
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let plane = n * h * w;
    let mask = &conditioning.data()[c * plane..];
    let nt = T::of(n as f64);
    let two = T::of(2.0);
    let mut grad = Tensor::zeros(generated.shape());
    let mut s = T::zero();
    for k in 0..c {
        let vals = &conditioning.data()[k * plane..(k + 1) * plane];
        let gen = &generated.data()[k * plane..(k + 1) * plane];
        let gd = &mut grad.data_mut()[k * plane..(k + 1) * plane];
        for i in 0..plane {
            if mask[i] > T::zero() {
                let d = gen[i] - vals[i];
                s = s + d * d;
                gd[i] = two * d / nt;
            }
        }
    }
    Ok((s / nt, grad))
}

/// `g_total = g_adv + lambda * g_rec`.
pub fn combined_generator_loss(g_adv: f64, g_rec: f64, lambda: f64) -> Result<LossBreakdown> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(LossBreakdown {
        d_loss: 0.0,
        g_adv,
        g_rec,
        g_total: g_adv + lambda * g_rec,
        lambda,
    })
}

/// Conditional-GAN losses. The discriminator outputs must already have been
/// computed on (image, map) pairs; the functional form is the unconditional
/// one.
pub fn cgan_losses<T: Scalar>(d_real_cond: &[T], d_fake_cond: &[T], kind: GeneratorLossKind) -> Result<(T, T)> {
    Ok((
        discriminator_loss(d_real_cond, d_fake_cond)?,
        generator_adversarial_loss(d_fake_cond, kind)?,
    ))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LatentDistribution {
    /// Uniform on `[-1, 1]`.
    #[default]
    Uniform,
    StandardNormal,
}

impl LatentDistribution {
    pub fn name(self) -> &'static str {
        match self {
            LatentDistribution::Uniform => "uniform",
            LatentDistribution::StandardNormal => "normal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform" => Some(LatentDistribution::Uniform),
            "normal" | "gaussian" => Some(LatentDistribution::StandardNormal),
            _ => None,
        }
    }
}

/// Shape and distribution of the latent code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatentSpec {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub distribution: LatentDistribution,
}

impl LatentSpec {
    pub fn new(channels: usize, height: usize, width: usize, distribution: LatentDistribution) -> Self {
        LatentSpec {
            channels,
            height,
            width,
            distribution,
        }
    }

    /// Draws a batch `[channels, n, height, width]`.
    pub fn sample<T: Scalar, R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Tensor<T> {
        let len = self.channels * n * self.height * self.width;
        let data = match self.distribution {
            LatentDistribution::Uniform => {
                let u = Uniform::new_inclusive(-1.0f64, 1.0).expect("valid range");
                (0..len).map(|_| T::of(u.sample(rng))).collect()
            }
            LatentDistribution::StandardNormal => (0..len)
                .map(|_| T::of(<StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)))
                .collect(),
        };
        Tensor::from_vec([self.channels, n, self.height, self.width], data).expect("latent shape")
    }
}
