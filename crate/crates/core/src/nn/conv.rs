//! Convolution geometry and the im2col / col2im lowering.

use crate::scalar::Scalar;

/// Geometry of a 2-d convolution between a "large" grid and a "small" grid.
///
/// For an ordinary convolution the large grid is the input; for a transposed
/// convolution it is the output. Small position `o` reads large position
/// `o * stride - pad + t * dilation` for kernel tap `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub dilation: usize,
    pub large: (usize, usize),
    pub small: (usize, usize),
}

impl ConvGeom {
    /// Output extent of an ordinary convolution along one axis.
    pub fn conv_out(len: usize, kernel: usize, stride: usize, pad: usize, dilation: usize) -> Option<usize> {
        let span = dilation * (kernel - 1) + 1;
        (len + 2 * pad).checked_sub(span).map(|v| v / stride + 1)
    }

    /// Output extent of a transposed convolution along one axis.
    pub fn conv_t_out(len: usize, kernel: usize, stride: usize, pad: usize, dilation: usize, out_pad: usize) -> Option<usize> {
        ((len - 1) * stride + dilation * (kernel - 1) + 1 + out_pad).checked_sub(2 * pad)
    }

    pub fn rows(&self, channels: usize) -> usize {
        channels * self.kernel * self.kernel
    }

    pub fn small_len(&self) -> usize {
        self.small.0 * self.small.1
    }

    pub fn large_len(&self) -> usize {
        self.large.0 * self.large.1
    }
}

/// Lower a channel-major `[c, n, H, W]` large grid to a
/// `[c * k * k, n * h * w]` column matrix over the small grid.
pub fn im2col<T: Scalar>(large: &[T], channels: usize, batch: usize, g: &ConvGeom) -> Vec<T> {
    let (lh, lw) = g.large;
    let (sh, sw) = g.small;
    let k = g.kernel;
    let ncols = batch * sh * sw;
    let mut cols = vec![T::zero(); channels * k * k * ncols];
    for c in 0..channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * ncols..(row + 1) * ncols];
                for b in 0..batch {
                    let src = &large[(c * batch + b) * lh * lw..(c * batch + b + 1) * lh * lw];
                    for oy in 0..sh {
                        let iy = (oy * g.stride + ky * g.dilation) as isize - g.pad as isize;
                        if iy < 0 || iy >= lh as isize {
                            continue;
                        }
                        let srow = &src[iy as usize * lw..(iy as usize + 1) * lw];
                        let drow = &mut dst[(b * sh + oy) * sw..(b * sh + oy + 1) * sw];
                        for (ox, d) in drow.iter_mut().enumerate() {
                            let ix = (ox * g.stride + kx * g.dilation) as isize - g.pad as isize;
                            if ix >= 0 && ix < lw as isize {
                                *d = srow[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-add columns back onto the large grid.
pub fn col2im<T: Scalar>(cols: &[T], channels: usize, batch: usize, g: &ConvGeom) -> Vec<T> {
    let (lh, lw) = g.large;
    let (sh, sw) = g.small;
    let k = g.kernel;
    let ncols = batch * sh * sw;
    let mut large = vec![T::zero(); channels * batch * lh * lw];
    for c in 0..channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * ncols..(row + 1) * ncols];
                for b in 0..batch {
                    let dst = &mut large[(c * batch + b) * lh * lw..(c * batch + b + 1) * lh * lw];
                    for oy in 0..sh {
                        let iy = (oy * g.stride + ky * g.dilation) as isize - g.pad as isize;
                        if iy < 0 || iy >= lh as isize {
                            continue;
                        }
                        let srow = &src[(b * sh + oy) * sw..(b * sh + oy + 1) * sw];
                        let drow = &mut dst[iy as usize * lw..(iy as usize + 1) * lw];
                        for (ox, &v) in srow.iter().enumerate() {
                            let ix = (ox * g.stride + kx * g.dilation) as isize - g.pad as isize;
                            if ix >= 0 && ix < lw as isize {
                                drow[ix as usize] = drow[ix as usize] + v;
                            }
                        }
                    }
                }
            }
        }
    }
    large
}
