use rand::Rng;

use super::config::{EvalConfig, FidBackend};
use crate::constraint::{encode_batch, ConstraintMap};
use crate::data::SplitPart;
use crate::error::{Error, Result};
use crate::image::{tensor_to_images, ImageTensor};
use crate::metrics::connectivity::ConnectivityCurve;
use crate::metrics::descriptors::{HOG_BINS, HOG_CELL};
use crate::metrics::{
    chi2_distance, connectivity_curves, constraint_mse, diversity_score, extract_features, fid, hog_descriptor,
    lbp_descriptor, CnnClassifier, ConstraintMse, FeatureEmbedding, FeatureExtractor, HistogramDescriptor,
    RandomProjection,
};
use crate::model::ConditionalGenerator;
use crate::scalar::Scalar;

const GEN_CHUNK: usize = 64;

/// `per_map` samples for every map, each with its own latent draw.
/// `out[k][i]` is sample `k` of map `i`.
pub fn generate_for_maps<T: Scalar, R: Rng>(
    generator: &dyn ConditionalGenerator<T>,
    maps: &[ConstraintMap<T>],
    per_map: usize,
    rng: &mut R,
) -> Result<Vec<Vec<ImageTensor<T>>>> {
    if maps.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let latent = generator.latent();
    let mut out = Vec::with_capacity(per_map);
    for _ in 0..per_map {
        let mut row = Vec::with_capacity(maps.len());
        for chunk in maps.chunks(GEN_CHUNK) {
            let cond = encode_batch(chunk)?;
            let z = latent.sample::<T, R>(chunk.len(), rng);
            row.extend(tensor_to_images(&generator.generate(&cond, &z)?)?);
        }
        out.push(row);
    }
    Ok(out)
}

/// Feature backend for FID. The classifier is trained on the labelled
/// images of `train`.
pub fn build_extractor<T: Scalar>(
    backend: FidBackend,
    shape: (usize, usize, usize),
    train: &SplitPart<T>,
) -> Result<Box<dyn FeatureExtractor<T>>> {
    let (h, w, c) = shape;
    match backend {
        FidBackend::RandomProjection { dim, seed } => Ok(Box::new(RandomProjection::new(h, w, c, dim, seed))),
        FidBackend::Classifier { epochs, seed } => {
            let labels: Option<Vec<usize>> = train.images.iter().map(|s| s.label).collect();
            let labels = labels.ok_or_else(|| Error::config("fid_backend", "cnn backend needs a labelled dataset"))?;
            let classes = labels.iter().max().map_or(0, |m| m + 1).max(2);
            let mut clf = CnnClassifier::new(h, w, c, classes, seed)?;
            clf.train(&train.images(), &labels, epochs, 32, 1e-3)?;
            Ok(Box::new(clf))
        }
    }
}

/// FID against a precomputed real embedding, and constraint MSE of the
/// first sample per map.
pub fn score_maps<T: Scalar, R: Rng>(
    generator: &dyn ConditionalGenerator<T>,
    maps: &[ConstraintMap<T>],
    real: &FeatureEmbedding,
    extractor: &dyn FeatureExtractor<T>,
    per_map: usize,
    rng: &mut R,
) -> Result<(f64, ConstraintMse)> {
    let samples = generate_for_maps(generator, maps, per_map, rng)?;
    let mse = constraint_mse(maps, &samples[0])?;
    let all: Vec<ImageTensor<T>> = samples.into_iter().flatten().collect();
    let f = fid(real, &extract_features(&all, extractor)?)?;
    Ok((f, mse))
}

fn mean_descriptor(ds: &[HistogramDescriptor]) -> Result<HistogramDescriptor> {
    let first = ds.first().ok_or(Error::EmptyBatch)?;
    let mut values = vec![0.0; first.values.len()];
    for d in ds {
        for (a, b) in values.iter_mut().zip(&d.values) {
            *a += b / ds.len() as f64;
        }
    }
    Ok(HistogramDescriptor {
        values,
        params: first.params,
    })
}

/// χ² distance between the mean descriptors of two image sets.
pub fn descriptor_distance<T: Scalar>(
    real: &[ImageTensor<T>],
    generated: &[ImageTensor<T>],
    describe: impl Fn(&ImageTensor<T>) -> Result<HistogramDescriptor>,
) -> Result<f64> {
    let r: Vec<_> = real.iter().map(&describe).collect::<Result<_>>()?;
    let g: Vec<_> = generated.iter().map(&describe).collect::<Result<_>>()?;
    chi2_distance(&mean_descriptor(&r)?, &mean_descriptor(&g)?)
}

/// Per-lag mean over images, skipping NaN entries; NaN where every image
/// lacks pairs at that lag.
pub fn mean_connectivity<T: Scalar>(images: &[ImageTensor<T>], max_lag: usize) -> Result<Vec<ConnectivityCurve>> {
    let per_image: Vec<Vec<ConnectivityCurve>> =
        images.iter().map(|im| connectivity_curves(im, max_lag)).collect::<Result<_>>()?;
    let first = per_image.first().ok_or(Error::EmptyBatch)?;
    Ok((0..first.len())
        .map(|k| {
            let lags = first[k].probabilities.len();
            let probabilities = (0..lags)
                .map(|l| {
                    let vals: Vec<f64> = per_image
                        .iter()
                        .map(|c| c[k].probabilities[l])
                        .filter(|p| !p.is_nan())
                        .collect();
                    if vals.is_empty() {
                        f64::NAN
                    } else {
                        vals.iter().sum::<f64>() / vals.len() as f64
                    }
                })
                .collect();
            ConnectivityCurve {
                facies: first[k].facies,
                direction: first[k].direction,
                probabilities,
                empty: per_image.iter().all(|c| c[k].empty),
            }
        })
        .collect())
}

/// Full metric set on one split part.
#[derive(Clone, Debug)]
pub struct EvalOutputs {
    /// `(metric, value)` in report order.
    pub metrics: Vec<(String, f64)>,
    pub connectivity_real: Vec<ConnectivityCurve>,
    pub connectivity_generated: Vec<ConnectivityCurve>,
}

pub fn evaluate_generator<T: Scalar, R: Rng>(
    generator: &dyn ConditionalGenerator<T>,
    part: &SplitPart<T>,
    extractor: &dyn FeatureExtractor<T>,
    cfg: &EvalConfig,
    rng: &mut R,
) -> Result<EvalOutputs> {
    let maps = part.maps();
    let real = part.images();
    let samples = generate_for_maps(generator, &maps, cfg.fid_samples_per_map, rng)?;
    let mse = constraint_mse(&maps, &samples[0])?;
    let generated: Vec<ImageTensor<T>> = samples.into_iter().flatten().collect();
    let fid_value = fid(&extract_features(&real, extractor)?, &extract_features(&generated, extractor)?)?;
    let mut metrics = vec![
        ("mse".to_string(), mse.per_image),
        ("mse_per_pixel".to_string(), mse.per_pixel),
        ("fid".to_string(), fid_value),
        (
            "hog_chi2".to_string(),
            descriptor_distance(&real, &generated, |im| hog_descriptor(im, HOG_CELL, HOG_BINS))?,
        ),
    ];
    for radius in [1, 2] {
        metrics.push((
            format!("lbp{radius}_chi2"),
            descriptor_distance(&real, &generated, |im| lbp_descriptor(im, radius))?,
        ));
    }
    let k = cfg.diversity_maps.min(maps.len());
    if k > 0 && cfg.diversity_pairs > 0 {
        let mut total = 0.0;
        for map in &maps[..k] {
            total += diversity_score(generator, map, cfg.diversity_pairs, rng)?;
        }
        metrics.push(("diversity".to_string(), total / k as f64));
    }
    Ok(EvalOutputs {
        metrics,
        connectivity_real: mean_connectivity(&real, cfg.connectivity_max_lag)?,
        connectivity_generated: mean_connectivity(&generated, cfg.connectivity_max_lag)?,
    })
}
