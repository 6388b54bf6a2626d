//! Connectivity function of binarised images: for each lag, the probability
//! that two same-facies pixels at that distance along an axis lie in the
//! same 4-connected component.

use std::fmt;

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::scalar::Scalar;

pub const DEFAULT_MAX_LAG: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Horizontal,
    Vertical,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Horizontal => "horizontal",
            Direction::Vertical => "vertical",
        })
    }
}

/// Probabilities indexed by lag `1..=max_lag` (element 0 is lag 1). Lags
/// without any same-facies pair hold NaN; `empty` is set when the facies is
/// absent from the image.
#[derive(Clone, Debug)]
pub struct ConnectivityCurve {
    pub facies: u8,
    pub direction: Direction,
    pub probabilities: Vec<f64>,
    pub empty: bool,
}

/// Binary facies grid: value > 0 is facies 1.
pub fn binarize<T: Scalar>(image: &ImageTensor<T>) -> Vec<u8> {
    let g = if image.channels() == 1 { image.clone() } else { image.grayscale() };
    g.data().iter().map(|&v| u8::from(v > T::zero())).collect()
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Component label per pixel (`usize::MAX` for other facies).
pub fn label_components(grid: &[u8], height: usize, width: usize, facies: u8) -> Vec<usize> {
    let mut dsu = Dsu::new(grid.len());
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if grid[i] != facies {
                continue;
            }
            if x + 1 < width && grid[i + 1] == facies {
                dsu.union(i, i + 1);
            }
            if y + 1 < height && grid[i + width] == facies {
                dsu.union(i, i + width);
            }
        }
    }
    (0..grid.len())
        .map(|i| if grid[i] == facies { dsu.find(i) } else { usize::MAX })
        .collect()
}

pub fn connectivity_binary(
    grid: &[u8],
    height: usize,
    width: usize,
    facies: u8,
    direction: Direction,
    max_lag: usize,
) -> Result<ConnectivityCurve> {
    if grid.len() != height * width {
        return Err(Error::shape(height * width, grid.len()));
    }
    if facies > 1 {
        return Err(Error::invalid(format!("facies must be 0 or 1, got {facies}")));
    }
    if max_lag == 0 {
        return Err(Error::invalid("max_lag must be >= 1"));
    }
    if !grid.contains(&facies) {
        return Ok(ConnectivityCurve {
            facies,
            direction,
            probabilities: vec![f64::NAN; max_lag],
            empty: true,
        });
    }
    let labels = label_components(grid, height, width, facies);
    let probabilities = (1..=max_lag)
        .map(|lag| {
            let (mut pairs, mut joined) = (0u64, 0u64);
            let (dy, dx) = match direction {
                Direction::Horizontal => (0, lag),
                Direction::Vertical => (lag, 0),
            };
            for y in 0..height.saturating_sub(dy) {
                for x in 0..width.saturating_sub(dx) {
                    let a = labels[y * width + x];
                    let b = labels[(y + dy) * width + x + dx];
                    if a != usize::MAX && b != usize::MAX {
                        pairs += 1;
                        joined += u64::from(a == b);
                    }
                }
            }
            if pairs == 0 {
                f64::NAN
            } else {
                joined as f64 / pairs as f64
            }
        })
        .collect();
    Ok(ConnectivityCurve {
        facies,
        direction,
        probabilities,
        empty: false,
    })
}

pub fn connectivity_function<T: Scalar>(
    image: &ImageTensor<T>,
    facies: u8,
    direction: Direction,
    max_lag: usize,
) -> Result<ConnectivityCurve> {
    connectivity_binary(&binarize(image), image.height(), image.width(), facies, direction, max_lag)
}

/// All four curves (both facies, both axes).
pub fn connectivity_curves<T: Scalar>(image: &ImageTensor<T>, max_lag: usize) -> Result<Vec<ConnectivityCurve>> {
    let grid = binarize(image);
    let mut out = Vec::with_capacity(4);
    for facies in [0, 1] {
        for dir in [Direction::Horizontal, Direction::Vertical] {
            out.push(connectivity_binary(&grid, image.height(), image.width(), facies, dir, max_lag)?);
        }
    }
    Ok(out)
}

/// Writes `facies,direction,lag,probability` rows. NaN is written as `nan`.
pub fn write_connectivity_csv(curves: &[ConnectivityCurve], out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "facies,direction,lag,probability")?;
    for c in curves {
        for (i, p) in c.probabilities.iter().enumerate() {
            if p.is_nan() {
                writeln!(out, "{},{},{},nan", c.facies, c.direction, i + 1)?;
            } else {
                writeln!(out, "{},{},{},{:.6}", c.facies, c.direction, i + 1, p)?;
            }
        }
    }
    Ok(())
}
