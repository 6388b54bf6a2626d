//! Image ingestion and export.
//!
//! 8-bit pixels map to `[-1, 1]` via `x / 127.5 - 1`.

use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::scalar::Scalar;

pub fn from_u8<T: Scalar>(v: u8) -> T {
    T::of(f64::from(v) / 127.5 - 1.0)
}

pub fn to_u8<T: Scalar>(v: T) -> u8 {
    ((v.f64().clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8
}

/// Builds an image from interleaved 8-bit pixels.
pub fn image_from_bytes<T: Scalar>(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<ImageTensor<T>> {
    if bytes.len() != height * width * channels {
        return Err(Error::shape(height * width * channels, bytes.len()));
    }
    ImageTensor::new(height, width, channels, bytes.iter().map(|&b| from_u8(b)).collect())
}

/// Reads a PNG (or any format enabled in `image`). Colour images with alpha
/// drop the alpha channel.
pub fn load_image<T: Scalar>(path: &Path) -> Result<ImageTensor<T>> {
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(g) => image_from_bytes(h, w, 1, g.as_raw()),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
            image_from_bytes(h, w, 1, img.to_luma8().as_raw())
        }
        other => image_from_bytes(h, w, 3, other.to_rgb8().as_raw()),
    }
}

pub fn to_dynamic<T: Scalar>(image: &ImageTensor<T>) -> DynamicImage {
    let (h, w, c) = image.shape();
    let bytes: Vec<u8> = image.data().iter().map(|&v| to_u8(v)).collect();
    if c == 1 {
        DynamicImage::ImageLuma8(GrayImage::from_raw(w as u32, h as u32, bytes).expect("buffer size"))
    } else {
        DynamicImage::ImageRgb8(RgbImage::from_raw(w as u32, h as u32, bytes).expect("buffer size"))
    }
}

pub fn save_png<T: Scalar>(image: &ImageTensor<T>, path: &Path) -> Result<()> {
    to_dynamic(image).save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

fn be_u32(b: &[u8], at: usize) -> Result<usize> {
    b.get(at..at + 4)
        .map(|s| u32::from_be_bytes([s[0], s[1], s[2], s[3]]) as usize)
        .ok_or_else(|| Error::invalid("truncated IDX header"))
}

/// Parses an unsigned-byte IDX array, returning its dimensions and payload.
pub fn parse_idx(bytes: &[u8]) -> Result<(Vec<usize>, &[u8])> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::invalid("not an IDX file"));
    }
    if bytes[2] != 0x08 {
        return Err(Error::invalid(format!("unsupported IDX element type 0x{:02x}", bytes[2])));
    }
    let nd = bytes[3] as usize;
    let dims = (0..nd).map(|i| be_u32(bytes, 4 + 4 * i)).collect::<Result<Vec<_>>>()?;
    let start = 4 + 4 * nd;
    let len: usize = dims.iter().product();
    let data = bytes
        .get(start..start + len)
        .ok_or_else(|| Error::invalid(format!("IDX payload truncated: need {len} bytes")))?;
    Ok((dims, data))
}

/// Images from an IDX array of shape `[n, h, w]` or `[n, h, w, c]`.
pub fn read_idx_images<T: Scalar>(path: &Path) -> Result<Vec<ImageTensor<T>>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (dims, data) = parse_idx(&bytes)?;
    let (n, h, w, c) = match dims[..] {
        [n, h, w] => (n, h, w, 1),
        [n, h, w, c] => (n, h, w, c),
        _ => return Err(Error::invalid(format!("IDX image array must be 3-D or 4-D, got {dims:?}"))),
    };
    let stride = h * w * c;
    (0..n).map(|i| image_from_bytes(h, w, c, &data[i * stride..(i + 1) * stride])).collect()
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (dims, data) = parse_idx(&bytes)?;
    if dims.len() != 1 {
        return Err(Error::invalid(format!("IDX label array must be 1-D, got {dims:?}")));
    }
    Ok(data.iter().map(|&b| b as usize).collect())
}

/// CIFAR binary batch: records of one label byte and a 3x32x32 planar image.
pub fn parse_cifar_batch<T: Scalar>(bytes: &[u8]) -> Result<(Vec<ImageTensor<T>>, Vec<usize>)> {
    const REC: usize = 1 + 3 * 32 * 32;
    if bytes.len() % REC != 0 {
        return Err(Error::invalid(format!("CIFAR batch length {} is not a multiple of {REC}", bytes.len())));
    }
    let mut images = Vec::with_capacity(bytes.len() / REC);
    let mut labels = Vec::with_capacity(bytes.len() / REC);
    for rec in bytes.chunks_exact(REC) {
        labels.push(rec[0] as usize);
        let planes = &rec[1..];
        let mut hwc = Vec::with_capacity(3 * 1024);
        for p in 0..1024 {
            for ch in 0..3 {
                hwc.push(planes[ch * 1024 + p]);
            }
        }
        images.push(image_from_bytes(32, 32, 3, &hwc)?);
    }
    Ok((images, labels))
}
