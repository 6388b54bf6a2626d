//! Small convolutional classifier whose penultimate activations serve as
//! FID features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::fid::FeatureExtractor;
use crate::error::{Error, Result};
use crate::image::{images_to_tensor, ImageTensor};
use crate::nn::{Activation, ConvGeom, NodeId, Optimizer, OptimizerKind, Tape};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const FEATURE_DIM: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct CnnClassifier<T> {
    shape: (usize, usize, usize),
    classes: usize,
    seed: u64,
    params: Vec<Tensor<T>>,
}

impl<T: Scalar> CnnClassifier<T> {
    pub fn new(height: usize, width: usize, channels: usize, classes: usize, seed: u64) -> Result<Self> {
        if classes < 2 {
            return Err(Error::invalid("classifier needs at least two classes"));
        }
        let down = |n: usize| ConvGeom::conv_out(n, 3, 2, 1, 1).ok_or_else(|| Error::invalid("image too small"));
        let (h2, w2) = (down(down(height)?)?, down(down(width)?)?);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = |shape: [usize; 4], fan_in: usize| {
            let d = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            let len = shape.iter().product();
            Tensor::from_vec(shape, (0..len).map(|_| T::of(d.sample(&mut rng))).collect()).expect("shape")
        };
        let flat = 16 * h2 * w2;
        let params = vec![
            init([8, channels, 3, 3], channels * 9),
            Tensor::zeros([8, 1, 1, 1]),
            init([16, 8, 3, 3], 72),
            Tensor::zeros([16, 1, 1, 1]),
            init([FEATURE_DIM, flat, 1, 1], flat),
            Tensor::zeros([FEATURE_DIM, 1, 1, 1]),
            init([classes, FEATURE_DIM, 1, 1], FEATURE_DIM),
            Tensor::zeros([classes, 1, 1, 1]),
        ];
        Ok(CnnClassifier {
            shape: (height, width, channels),
            classes,
            seed,
            params,
        })
    }

    fn forward(&self, tape: &mut Tape<T>, p: &[NodeId], x: NodeId) -> Result<(NodeId, NodeId)> {
        let leaky = Activation::LeakyRelu;
        let h = tape.conv2d(x, p[0], Some(p[1]), 2, 1, 1)?;
        let h = tape.activation(h, leaky);
        let h = tape.conv2d(h, p[2], Some(p[3]), 2, 1, 1)?;
        let h = tape.activation(h, leaky);
        let h = tape.flatten(h);
        let f = tape.dense(h, p[4], Some(p[5]))?;
        let f = tape.activation(f, leaky);
        let logits = tape.dense(f, p[6], Some(p[7]))?;
        Ok((f, logits))
    }

    fn batch(&self, images: &[ImageTensor<T>]) -> Result<Tensor<T>> {
        if let Some(im) = images.iter().find(|im| im.shape() != self.shape) {
            return Err(Error::shape(self.shape, im.shape()));
        }
        images_to_tensor(images)
    }

    /// Mini-batch Adam on softmax cross-entropy. Returns the mean loss of the
    /// last epoch.
    pub fn train(&mut self, images: &[ImageTensor<T>], labels: &[usize], epochs: usize, batch: usize, lr: f64) -> Result<f64> {
        if images.len() != labels.len() || images.is_empty() {
            return Err(Error::shape(images.len(), labels.len()));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= self.classes) {
            return Err(Error::invalid(format!("label {l} out of range")));
        }
        let mut opt = Optimizer::new(OptimizerKind::adam_default(), lr, &self.params);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed);
        let mut order: Vec<usize> = (0..images.len()).collect();
        let mut last = 0.0;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            let (mut sum, mut steps) = (0.0, 0);
            for chunk in order.chunks(batch.max(1)) {
                let imgs: Vec<_> = chunk.iter().map(|&i| images[i].clone()).collect();
                let labs: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
                let mut tape = Tape::new();
                let p: Vec<NodeId> = self.params.iter().map(|t| tape.leaf(t.clone(), true)).collect();
                let x = tape.leaf(self.batch(&imgs)?, false);
                let (_, logits) = self.forward(&mut tape, &p, x)?;
                let (loss, grad) = softmax_cross_entropy(tape.value(logits), &labs);
                let mut g = tape.backward(vec![(logits, grad)])?;
                let grads: Vec<Tensor<T>> = p
                    .iter()
                    .zip(&self.params)
                    .map(|(&id, t)| g.take(id).unwrap_or_else(|| Tensor::zeros(t.shape())))
                    .collect();
                opt.apply(&mut self.params, &grads)?;
                sum += loss;
                steps += 1;
            }
            last = sum / steps as f64;
        }
        Ok(last)
    }

    fn run(&self, images: &[ImageTensor<T>]) -> Result<(Tensor<T>, Tensor<T>)> {
        let mut tape = Tape::new();
        let p: Vec<NodeId> = self.params.iter().map(|t| tape.leaf(t.clone(), false)).collect();
        let x = tape.leaf(self.batch(images)?, false);
        let (f, l) = self.forward(&mut tape, &p, x)?;
        Ok((tape.value(f).clone(), tape.value(l).clone()))
    }

    pub fn predict(&self, images: &[ImageTensor<T>]) -> Result<Vec<usize>> {
        let (_, logits) = self.run(images)?;
        let n = images.len();
        Ok((0..n)
            .map(|b| {
                (0..self.classes)
                    .max_by(|&i, &j| logits.data()[i * n + b].partial_cmp(&logits.data()[j * n + b]).expect("finite"))
                    .expect("classes")
            })
            .collect())
    }

    pub fn accuracy(&self, images: &[ImageTensor<T>], labels: &[usize]) -> Result<f64> {
        let pred = self.predict(images)?;
        Ok(pred.iter().zip(labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64)
    }
}

/// Mean cross-entropy of logits `[k, n, 1, 1]` and its gradient.
fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> (f64, Tensor<T>) {
    let (k, n) = (logits.channels(), logits.batch());
    let mut grad = Tensor::zeros(logits.shape());
    let mut loss = 0.0;
    for b in 0..n {
        let z: Vec<f64> = (0..k).map(|c| logits.data()[c * n + b].f64()).collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = z.iter().map(|v| (v - m).exp()).sum();
        loss += -(z[labels[b]] - m - s.ln());
        for c in 0..k {
            let p = (z[c] - m).exp() / s;
            let t = if c == labels[b] { 1.0 } else { 0.0 };
            grad.data_mut()[c * n + b] = T::of((p - t) / n as f64);
        }
    }
    (loss / n as f64, grad)
}

impl<T: Scalar> FeatureExtractor<T> for CnnClassifier<T> {
    fn name(&self) -> String {
        format!("cnn{}c{}s{}", FEATURE_DIM, self.classes, self.seed)
    }

    fn dim(&self) -> usize {
        FEATURE_DIM
    }

    fn extract(&self, images: &[ImageTensor<T>]) -> Result<Vec<Vec<f64>>> {
        let n = images.len();
        let mut out = Vec::with_capacity(n);
        for chunk in images.chunks(64) {
            let (f, _) = self.run(chunk)?;
            let m = chunk.len();
            out.extend((0..m).map(|b| (0..FEATURE_DIM).map(|k| f.data()[k * m + b].f64()).collect()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learns_a_separable_problem() {
        let imgs: Vec<ImageTensor<f64>> = (0..40)
            .map(|i| {
                let v = if i % 2 == 0 { 0.8 } else { -0.8 };
                ImageTensor::from_fn(8, 8, 1, |y, _, _| if y < 4 { v } else { -v }).unwrap()
            })
            .collect();
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let mut clf = CnnClassifier::new(8, 8, 1, 2, 1).unwrap();
        clf.train(&imgs, &labels, 20, 8, 1e-2).unwrap();
        assert_eq!(clf.accuracy(&imgs, &labels).unwrap(), 1.0);
        let f = clf.extract(&imgs[..3]).unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f[0].len(), FEATURE_DIM);
        assert_eq!(f[0], clf.extract(&imgs[..1]).unwrap()[0]);
    }

    #[test]
    fn cross_entropy_gradient() {
        let logits = Tensor::<f64>::from_vec([3, 2, 1, 1], vec![0.1, -0.3, 0.7, 0.2, -0.5, 0.4]).unwrap();
        let labels = [2, 0];
        let (_, g) = softmax_cross_entropy(&logits, &labels);
        let h = 1e-6;
        for i in 0..6 {
            let mut p = logits.clone();
            p.data_mut()[i] += h;
            let mut m = logits.clone();
            m.data_mut()[i] -= h;
            let fd = (softmax_cross_entropy(&p, &labels).0 - softmax_cross_entropy(&m, &labels).0) / (2.0 * h);
            assert!((fd - g.data()[i]).abs() < 1e-7);
        }
    }
}
