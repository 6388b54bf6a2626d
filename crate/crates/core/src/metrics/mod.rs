//! Evaluation metrics.

pub mod classifier;
pub mod connectivity;
pub mod descriptors;
pub mod fid;

pub use classifier::CnnClassifier;
pub use connectivity::{connectivity_binary, connectivity_curves, connectivity_function, ConnectivityCurve, Direction};
pub use descriptors::{chi2_distance, hog_descriptor, lbp_descriptor, DescriptorParams, HistogramDescriptor};
pub use fid::{extract_features, fid, FeatureEmbedding, FeatureExtractor, RandomProjection};

use std::fmt;
use std::io::Write;

use rand::Rng;

use crate::constraint::{encode_batch, ConstraintMap};
use crate::error::{Error, Result};
use crate::image::{tensor_to_images, ImageTensor};
use crate::model::ConditionalGenerator;
use crate::objectives::reconstruction_loss;
use crate::scalar::Scalar;

/// Constraint reconstruction error in both normalisations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintMse {
    /// `(1/L) Σ_i ‖y_i − M(y_i) ⊙ G_i‖_F²`.
    pub per_image: f64,
    /// Total squared error divided by the number of constrained locations.
    pub per_pixel: f64,
}

pub fn constraint_mse<T: Scalar>(maps: &[ConstraintMap<T>], generated: &[ImageTensor<T>]) -> Result<ConstraintMse> {
    if maps.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if maps.len() != generated.len() {
        return Err(Error::shape(maps.len(), generated.len()));
    }
    let mut total = 0.0;
    let mut pixels = 0usize;
    for (m, g) in maps.iter().zip(generated) {
        total += reconstruction_loss(m, g)?.f64();
        pixels += m.count();
    }
    Ok(ConstraintMse {
        per_image: total / maps.len() as f64,
        per_pixel: if pixels == 0 { 0.0 } else { total / pixels as f64 },
    })
}

/// Mean over `n_pairs` of the mean absolute difference between grayscaled
/// `G(y, z_a)` and `G(y, z_b)` with independent latents.
pub fn diversity_score<T: Scalar, R: Rng + ?Sized>(
    generator: &dyn ConditionalGenerator<T>,
    map: &ConstraintMap<T>,
    n_pairs: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs must be >= 1"));
    }
    let latent = generator.latent();
    let cond = encode_batch(&vec![map.clone(); 2])?;
    let mut total = 0.0;
    for _ in 0..n_pairs {
        let z = latent.sample::<T, R>(2, rng);
        let out = tensor_to_images(&generator.generate(&cond, &z)?)?;
        total += mean_abs_gray_diff(&out[0], &out[1])?;
    }
    Ok(total / n_pairs as f64)
}

/// Mean absolute difference of the grayscale versions of two images.
pub fn mean_abs_gray_diff<T: Scalar>(a: &ImageTensor<T>, b: &ImageTensor<T>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(a.shape(), b.shape()));
    }
    let (ga, gb) = (a.grayscale(), b.grayscale());
    let n = ga.data().len() as f64;
    Ok(ga.data().iter().zip(gb.data()).map(|(x, y)| (x.f64() - y.f64()).abs()).sum::<f64>() / n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "validation" => Some(Split::Validation),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One line of a metric report: `epoch metric split value backend`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub epoch: usize,
    pub metric: String,
    pub split: Split,
    pub value: f64,
    pub backend: String,
}

impl fmt::Display for MetricRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {:.6} {}", self.epoch, self.metric, self.split, self.value, self.backend)
    }
}

impl MetricRecord {
    pub fn parse(line: &str) -> Option<Self> {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 5 {
            return None;
        }
        Some(MetricRecord {
            epoch: cols[0].parse().ok()?,
            metric: cols[1].to_string(),
            split: Split::parse(cols[2])?,
            value: cols[3].parse().ok()?,
            backend: cols[4].to_string(),
        })
    }
}

pub fn write_metric_report(records: &[MetricRecord], out: &mut impl Write) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{r}")?;
    }
    Ok(())
}
