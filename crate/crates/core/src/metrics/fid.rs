//! Feature embeddings and the Fréchet distance between their Gaussian fits.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::scalar::Scalar;

/// Deterministic image-to-vector map.
pub trait FeatureExtractor<T: Scalar> {
    /// Backend name written into every report.
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn extract(&self, images: &[ImageTensor<T>]) -> Result<Vec<Vec<f64>>>;
}

/// Sample mean and unbiased covariance of an embedding set.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureEmbedding {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub n_samples: usize,
}

impl FeatureEmbedding {
    pub fn from_vectors(vectors: &[Vec<f64>]) -> Result<Self> {
        let n = vectors.len();
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 samples for a covariance, got {n}")));
        }
        let d = vectors[0].len();
        if let Some(v) = vectors.iter().find(|v| v.len() != d) {
            return Err(Error::shape(d, v.len()));
        }
        let x = DMatrix::from_fn(n, d, |i, j| vectors[i][j]);
        let mu = x.row_mean().transpose();
        let mut centered = x;
        for mut row in centered.row_iter_mut() {
            row -= mu.transpose();
        }
        let sigma = centered.transpose() * &centered / (n as f64 - 1.0);
        Ok(FeatureEmbedding { mu, sigma, n_samples: n })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

pub fn extract_features<T: Scalar>(images: &[ImageTensor<T>], extractor: &dyn FeatureExtractor<T>) -> Result<FeatureEmbedding> {
    FeatureEmbedding::from_vectors(&extractor.extract(images)?)
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `‖μa − μb‖² + Tr(Σa + Σb − 2 (Σa Σb)^{1/2})`.
///
/// The trace of the product root is taken from the eigenvalues of the
/// symmetric matrix `Σa^{1/2} Σb Σa^{1/2}`, which share the spectrum of
/// `Σa Σb`. Negative eigenvalues (numerical noise) are clipped to zero.
pub fn fid(a: &FeatureEmbedding, b: &FeatureEmbedding) -> Result<f64> {
    if a.dim() != b.dim() || a.sigma.shape() != b.sigma.shape() {
        return Err(Error::shape(a.dim(), b.dim()));
    }
    let diff = &a.mu - &b.mu;
    let ra = psd_sqrt(&a.sigma);
    let inner = &ra * &b.sigma * &ra;
    let inner = (&inner + inner.transpose()) * 0.5;
    let eig = SymmetricEigen::new(inner);
    let tr_root: f64 = eig
        .eigenvalues
        .iter()
        .map(|&v| v.max(0.0).sqrt())
        .sum();
    Ok(diff.norm_squared() + a.sigma.trace() + b.sigma.trace() - 2.0 * tr_root)
}

/// Fixed Gaussian random projection of the flattened image, followed by
/// `tanh`. Cheap and deterministic for a given seed.
#[derive(Clone, Debug)]
pub struct RandomProjection {
    input: (usize, usize, usize),
    dim: usize,
    seed: u64,
    weights: Vec<f64>,
}

impl RandomProjection {
    pub fn new(height: usize, width: usize, channels: usize, dim: usize, seed: u64) -> Self {
        let n_in = height * width * channels;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(0.0, 1.0 / (n_in as f64).sqrt()).expect("positive std");
        let weights = (0..n_in * dim).map(|_| dist.sample(&mut rng)).collect();
        RandomProjection {
            input: (height, width, channels),
            dim,
            seed,
            weights,
        }
    }
}

impl<T: Scalar> FeatureExtractor<T> for RandomProjection {
    fn name(&self) -> String {
        format!("randproj{}s{}", self.dim, self.seed)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn extract(&self, images: &[ImageTensor<T>]) -> Result<Vec<Vec<f64>>> {
        let n_in = self.input.0 * self.input.1 * self.input.2;
        images
            .iter()
            .map(|im| {
                if im.shape() != self.input {
                    return Err(Error::shape(self.input, im.shape()));
                }
                let x: Vec<f64> = im.data().iter().map(|v| v.f64()).collect();
                Ok((0..self.dim)
                    .map(|k| {
                        let w = &self.weights[k * n_in..(k + 1) * n_in];
                        w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().tanh()
                    })
                    .collect())
            })
            .collect()
    }
}
