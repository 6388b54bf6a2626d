//! Dense 4-d buffers used by the network code.
//!
//! Activations are stored channel-major over the whole batch: index
//! `((c * n + b) * h + y) * w + x`. With that layout a convolution expressed
//! as `W[out, in*k*k] x cols[in*k*k, n*h*w]` writes its result in place,
//! channel concatenation is a buffer append, and batch normalisation reads one
//! contiguous run per channel.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Tensor {
            shape,
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: [usize; 4], v: T) -> Self {
        Tensor {
            shape,
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<T>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::shape(len, data.len()));
        }
        Ok(Tensor { shape, data })
    }

    /// Channels, batch, height, width.
    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape[0]
    }

    pub fn batch(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    pub fn spatial(&self) -> (usize, usize) {
        (self.shape[2], self.shape[3])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, c: usize, b: usize, y: usize, x: usize) -> usize {
        let [_, n, h, w] = self.shape;
        ((c * n + b) * h + y) * w + x
    }

    #[inline]
    pub fn at(&self, c: usize, b: usize, y: usize, x: usize) -> T {
        self.data[self.index(c, b, y, x)]
    }

    pub fn reshaped(mut self, shape: [usize; 4]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::shape(shape, self.shape));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.data {
            *v = *v * s;
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_usize(self.data.len().max(1)).unwrap()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Concatenate along the channel axis. All parts must agree on batch and
    /// spatial size.
    pub fn concat_channels(parts: &[&Tensor<T>]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::invalid("concat of nothing"))?;
        let [_, n, h, w] = first.shape;
        let mut c = 0;
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        for p in parts {
            if p.shape[1..] != [n, h, w] {
                return Err(Error::shape(first.shape, p.shape));
            }
            c += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor {
            shape: [c, n, h, w],
            data,
        })
    }

    /// Inverse of [`Tensor::concat_channels`].
    pub fn split_channels(&self, sizes: &[usize]) -> Result<Vec<Self>> {
        let [c, n, h, w] = self.shape;
        if sizes.iter().sum::<usize>() != c {
            return Err(Error::shape(c, sizes));
        }
        let plane = n * h * w;
        let mut out = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &s in sizes {
            out.push(Tensor {
                shape: [s, n, h, w],
                data: self.data[start * plane..(start + s) * plane].to_vec(),
            });
            start += s;
        }
        Ok(out)
    }

    /// Select batch entries (in the given order).
    pub fn select_batch(&self, idx: &[usize]) -> Self {
        let [c, n, h, w] = self.shape;
        let hw = h * w;
        let mut data = Vec::with_capacity(c * idx.len() * hw);
        for ci in 0..c {
            for &b in idx {
                debug_assert!(b < n);
                let s = (ci * n + b) * hw;
                data.extend_from_slice(&self.data[s..s + hw]);
            }
        }
        Tensor {
            shape: [c, idx.len(), h, w],
            data,
        }
    }

    /// Per-sample feature vectors in `(c, y, x)` order, laid out as a
    /// `[features, batch, 1, 1]` tensor.
    pub fn flatten_samples(&self) -> Self {
        let [c, n, h, w] = self.shape;
        let f = c * h * w;
        let mut data = vec![T::zero(); f * n];
        for ci in 0..c {
            for b in 0..n {
                for y in 0..h {
                    for x in 0..w {
                        let feat = (ci * h + y) * w + x;
                        data[feat * n + b] = self.data[((ci * n + b) * h + y) * w + x];
                    }
                }
            }
        }
        Tensor {
            shape: [f, n, 1, 1],
            data,
        }
    }

    /// Inverse of [`Tensor::flatten_samples`].
    pub fn unflatten_samples(&self, c: usize, h: usize, w: usize) -> Result<Self> {
        let [f, n, hh, ww] = self.shape;
        if hh != 1 || ww != 1 || f != c * h * w {
            return Err(Error::shape([c * h * w, n, 1, 1], self.shape));
        }
        let mut data = vec![T::zero(); f * n];
        for ci in 0..c {
            for b in 0..n {
                for y in 0..h {
                    for x in 0..w {
                        let feat = (ci * h + y) * w + x;
                        data[((ci * n + b) * h + y) * w + x] = self.data[feat * n + b];
                    }
                }
            }
        }
        Ok(Tensor {
            shape: [c, n, h, w],
            data,
        })
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(shape: [usize; 4]) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn flatten_round_trip() {
        let t = seq([3, 2, 4, 5]);
        let f = t.flatten_samples();
        assert_eq!(f.shape(), [60, 2, 1, 1]);
        assert_eq!(f.unflatten_samples(3, 4, 5).unwrap(), t);
        // sample 1, channel 2, pixel (3, 4)
        let feat = (2 * 4 + 3) * 5 + 4;
        assert_eq!(f.at(feat, 1, 0, 0), t.at(2, 1, 3, 4));
    }

    #[test]
    fn concat_then_split() {
        let a = seq([2, 3, 2, 2]);
        let b = seq([1, 3, 2, 2]).map(|v| -v);
        let c = Tensor::concat_channels(&[&a, &b]).unwrap();
        assert_eq!(c.shape(), [3, 3, 2, 2]);
        assert_eq!(c.at(2, 1, 1, 0), b.at(0, 1, 1, 0));
        let parts = c.split_channels(&[2, 1]).unwrap();
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
    }

    #[test]
    fn concat_rejects_spatial_mismatch() {
        let a = seq([1, 1, 2, 2]);
        let b = seq([1, 1, 3, 2]);
        assert!(Tensor::concat_channels(&[&a, &b]).is_err());
    }

    #[test]
    fn select_batch_picks_samples() {
        let t = seq([2, 3, 1, 2]);
        let s = t.select_batch(&[2, 0]);
        assert_eq!(s.shape(), [2, 2, 1, 2]);
        assert_eq!(s.at(1, 0, 0, 1), t.at(1, 2, 0, 1));
        assert_eq!(s.at(0, 1, 0, 0), t.at(0, 0, 0, 0));
    }
}
