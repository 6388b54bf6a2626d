//! Histogram texture descriptors (HOG, LBP) and the χ² distance.

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::scalar::Scalar;

pub const HOG_CELL: usize = 8;
pub const HOG_BINS: usize = 9;
/// Cells per block side (clipped to the cell grid).
pub const HOG_BLOCK: usize = 2;
const L2_EPS: f64 = 1e-12;
const LBP_TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DescriptorParams {
    Hog { cell_size: usize, n_bins: usize },
    Lbp { radius: usize, n_points: usize },
}

/// Normalised histogram (sums to one).
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramDescriptor {
    pub values: Vec<f64>,
    pub params: DescriptorParams,
}

fn gray_plane<T: Scalar>(image: &ImageTensor<T>) -> Vec<f64> {
    let g = if image.channels() == 1 { image.clone() } else { image.grayscale() };
    g.data().iter().map(|v| v.f64()).collect()
}

/// Histogram of oriented gradients.
///
/// Gradients are central differences (zero on the border rows/columns),
/// orientations unsigned in `[0, 180)` with hard binning, cell histograms sum
/// gradient magnitude. A cell with no gradient gets a uniform histogram.
/// Blocks of `HOG_BLOCK`² cells slide by one cell and are L2-normalised; the
/// concatenation is finally L1-normalised.
pub fn hog_descriptor<T: Scalar>(image: &ImageTensor<T>, cell_size: usize, n_bins: usize) -> Result<HistogramDescriptor> {
    if cell_size == 0 || n_bins == 0 {
        return Err(Error::invalid("cell size and bin count must be positive"));
    }
    let (h, w) = (image.height(), image.width());
    if h < cell_size || w < cell_size {
        return Err(Error::invalid(format!("{h}x{w} image is smaller than one {cell_size}x{cell_size} cell")));
    }
    let g = gray_plane(image);
    let mut mag = vec![0.0; h * w];
    let mut bin = vec![0usize; h * w];
    let width_deg = 180.0 / n_bins as f64;
    for y in 0..h {
        for x in 0..w {
            let gx = if x > 0 && x + 1 < w { g[y * w + x + 1] - g[y * w + x - 1] } else { 0.0 };
            let gy = if y > 0 && y + 1 < h { g[(y + 1) * w + x] - g[(y - 1) * w + x] } else { 0.0 };
            mag[y * w + x] = (gx * gx + gy * gy).sqrt();
            let mut ang = gy.atan2(gx).to_degrees();
            if ang < 0.0 {
                ang += 180.0;
            }
            bin[y * w + x] = ((ang / width_deg) as usize) % n_bins;
        }
    }
    let (cy, cx) = (h / cell_size, w / cell_size);
    let mut cells = vec![0.0; cy * cx * n_bins];
    for y in 0..cy * cell_size {
        for x in 0..cx * cell_size {
            let c = (y / cell_size) * cx + x / cell_size;
            cells[c * n_bins + bin[y * w + x]] += mag[y * w + x];
        }
    }
    for cell in cells.chunks_exact_mut(n_bins) {
        if cell.iter().all(|&v| v == 0.0) {
            cell.fill(1.0 / n_bins as f64);
        }
    }
    let (by, bx) = (HOG_BLOCK.min(cy), HOG_BLOCK.min(cx));
    let mut out = Vec::new();
    for y0 in 0..=cy - by {
        for x0 in 0..=cx - bx {
            let start = out.len();
            for yy in y0..y0 + by {
                for xx in x0..x0 + bx {
                    out.extend_from_slice(&cells[(yy * cx + xx) * n_bins..(yy * cx + xx + 1) * n_bins]);
                }
            }
            let norm = (out[start..].iter().map(|v| v * v).sum::<f64>() + L2_EPS).sqrt();
            out[start..].iter_mut().for_each(|v| *v /= norm);
        }
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    Ok(HistogramDescriptor {
        values: out,
        params: DescriptorParams::Hog { cell_size, n_bins },
    })
}

/// Circular local binary patterns with `8 * radius` bilinearly interpolated
/// neighbours. A neighbour at least as bright as the centre sets its bit.
/// The histogram covers all `2^P` codes over interior pixels.
pub fn lbp_descriptor<T: Scalar>(image: &ImageTensor<T>, radius: usize) -> Result<HistogramDescriptor> {
    if !(1..=2).contains(&radius) {
        return Err(Error::invalid(format!("radius must be 1 or 2, got {radius}")));
    }
    let (h, w) = (image.height(), image.width());
    if h <= 2 * radius || w <= 2 * radius {
        return Err(Error::invalid(format!("{h}x{w} image too small for radius {radius}")));
    }
    let p = 8 * radius;
    let g = gray_plane(image);
    let r = radius as f64;
    let offsets: Vec<(f64, f64)> = (0..p)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / p as f64;
            let snap = |v: f64| (v * 1e9).round() / 1e9;
            (snap(-r * t.sin()), snap(r * t.cos()))
        })
        .collect();
    let mut hist = vec![0.0; 1 << p];
    let mut count = 0usize;
    for y in radius..h - radius {
        for x in radius..w - radius {
            let center = g[y * w + x];
            let mut code = 0usize;
            for (k, &(dy, dx)) in offsets.iter().enumerate() {
                let v = bilinear(&g, w, y as f64 + dy, x as f64 + dx);
                if v - center >= -LBP_TIE_TOL {
                    code |= 1 << k;
                }
            }
            hist[code] += 1.0;
            count += 1;
        }
    }
    hist.iter_mut().for_each(|v| *v /= count as f64);
    Ok(HistogramDescriptor {
        values: hist,
        params: DescriptorParams::Lbp { radius, n_points: p },
    })
}

fn bilinear(g: &[f64], w: usize, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let (y0, x0) = (y0 as usize, x0 as usize);
    let at = |yy: usize, xx: usize| g[yy * w + xx];
    let top = if fx == 0.0 { at(y0, x0) } else { at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1) * fx };
    if fy == 0.0 {
        return top;
    }
    let bottom = if fx == 0.0 { at(y0 + 1, x0) } else { at(y0 + 1, x0) * (1.0 - fx) + at(y0 + 1, x0 + 1) * fx };
    top * (1.0 - fy) + bottom * fy
}

/// `0.5 * Σ (a - b)² / (a + b + 1e-10)`.
pub fn chi2_distance(h1: &HistogramDescriptor, h2: &HistogramDescriptor) -> Result<f64> {
    if h1.params != h2.params || h1.values.len() != h2.values.len() {
        return Err(Error::invalid("histograms use different binning"));
    }
    Ok(0.5
        * h1.values
            .iter()
            .zip(&h2.values)
            .map(|(a, b)| (a - b) * (a - b) / (a + b + 1e-10))
            .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> ImageTensor<f64> {
        ImageTensor::from_fn(h, w, 1, |y, x, _| f(y, x)).unwrap()
    }

    #[test]
    fn hog_constant_is_uniform() {
        let d = hog_descriptor(&img(16, 16, |_, _| 0.3), 8, 9).unwrap();
        let first = d.values[0];
        assert!(d.values.iter().all(|&v| (v - first).abs() < 1e-15));
        assert!((d.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hog_vertical_edge_hits_bin_zero() {
        let d = hog_descriptor(&img(8, 8, |_, x| if x < 4 { -0.5 } else { 0.5 }), 8, 9).unwrap();
        let max = d.values.iter().cloned().fold(0.0, f64::max);
        assert_eq!(d.values[0], max);
        assert!(d.values[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hog_shift_invariant() {
        let a = img(16, 8, |y, x| ((y * 3 + x * 5) % 7) as f64 / 10.0 - 0.3);
        let b = img(16, 8, |y, x| ((y * 3 + x * 5) % 7) as f64 / 10.0 - 0.1);
        let (da, db) = (hog_descriptor(&a, 8, 9).unwrap(), hog_descriptor(&b, 8, 9).unwrap());
        for (x, y) in da.values.iter().zip(&db.values) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(hog_descriptor(&img(4, 8, |_, _| 0.0), 8, 9).is_err());
    }

    #[test]
    fn lbp_cases() {
        let c = lbp_descriptor(&img(5, 5, |_, _| 0.2), 1).unwrap();
        assert_eq!(c.values[255], 1.0);
        let c2 = lbp_descriptor(&img(6, 6, |_, _| -0.7), 2).unwrap();
        assert_eq!(c2.values[(1 << 16) - 1], 1.0);
        let pit = lbp_descriptor(&img(3, 3, |y, x| if (y, x) == (1, 1) { -1.0 } else { 0.5 }), 1).unwrap();
        assert_eq!(pit.values[255], 1.0);
        assert!(lbp_descriptor(&img(4, 4, |_, _| 0.0), 2).is_err());
    }

    #[test]
    fn chi2_cases() {
        let p = DescriptorParams::Lbp { radius: 1, n_points: 8 };
        let a = HistogramDescriptor { values: vec![1.0, 0.0], params: p };
        let b = HistogramDescriptor { values: vec![0.0, 1.0], params: p };
        assert!((chi2_distance(&a, &b).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(chi2_distance(&a, &a).unwrap(), 0.0);
        let c = HistogramDescriptor { values: vec![0.5, 0.5, 0.0], params: p };
        assert!(chi2_distance(&a, &c).is_err());
    }
}
