use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Luminance weights for RGB to grayscale.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// A dense image with values in `[-1, 1]`, stored row-major as
/// `(height, width, channels)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> ImageTensor<T> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        check_dims(height, width, channels)?;
        if data.len() != height * width * channels {
            return Err(Error::shape(height * width * channels, data.len()));
        }
        if let Some(v) = data.iter().find(|v| !(v.abs() <= T::one())) {
            return Err(Error::invalid(format!("pixel value {v} outside [-1, 1]")));
        }
        Ok(ImageTensor {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image, clamping every value into `[-1, 1]`. NaN is rejected.
    pub fn clamped(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if data.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("NaN pixel"));
        }
        let data = data
            .into_iter()
            .map(|v| v.max(-T::one()).min(T::one()))
            .collect();
        Self::new(height, width, channels, data)
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::new(height, width, channels, vec![T::zero(); height * width * channels])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data)
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

    /// `(height, width, channels)`
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Single-channel luminance view (identity for grayscale inputs).
    pub fn grayscale(&self) -> ImageTensor<T> {
        if self.channels == 1 {
            return self.clone();
        }
        let w = LUMA.map(T::of);
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| w[0] * px[0] + w[1] * px[1] + w[2] * px[2])
            .map(|v| v.max(-T::one()).min(T::one()))
            .collect();
        ImageTensor {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    pub fn cast<U: Scalar>(&self) -> ImageTensor<U> {
        ImageTensor {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }
}

pub(crate) fn check_dims(height: usize, width: usize, channels: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::invalid(format!("degenerate image {height}x{width}")));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::invalid(format!("unsupported channel count {channels}")));
    }
    Ok(())
}

/// Stack images into a channel-major batch tensor.
pub fn images_to_tensor<T: Scalar>(images: &[ImageTensor<T>]) -> Result<Tensor<T>> {
    let first = images.first().ok_or(Error::EmptyBatch)?;
    let (h, w, c) = first.shape();
    let n = images.len();
    let mut t = Tensor::zeros([c, n, h, w]);
    for (b, img) in images.iter().enumerate() {
        if img.shape() != (h, w, c) {
            return Err(Error::shape((h, w, c), img.shape()));
        }
        for y in 0..h {
            for x in 0..w {
                for ci in 0..c {
                    let i = t.index(ci, b, y, x);
                    t.data_mut()[i] = img.get(y, x, ci);
                }
            }
        }
    }
    Ok(t)
}

/// Split a batch tensor back into images, clamping into `[-1, 1]`.
pub fn tensor_to_images<T: Scalar>(t: &Tensor<T>) -> Result<Vec<ImageTensor<T>>> {
    let [c, n, h, w] = t.shape();
    (0..n)
        .map(|b| {
            let mut data = Vec::with_capacity(h * w * c);
            for y in 0..h {
                for x in 0..w {
                    for ci in 0..c {
                        data.push(t.at(ci, b, y, x));
                    }
                }
            }
            ImageTensor::clamped(h, w, c, data)
        })
        .collect()
}
