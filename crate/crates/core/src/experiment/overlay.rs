use crate::constraint::{satisfied_fraction, ConstraintMap, Satisfaction};
use crate::error::Result;
use crate::image::ImageTensor;
use crate::scalar::Scalar;

/// How each constrained location is marked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OverlayMode {
    /// 3x3 block centred on the location, clipped at the border.
    Block,
    /// The location itself only.
    PurePixel,
}

const GREEN: [f64; 3] = [-1.0, 1.0, -1.0];
const RED: [f64; 3] = [1.0, -1.0, -1.0];

/// RGB copy of `image` with every constrained location painted green when
/// its squared error is below `eps` and red otherwise.
pub fn render_overlay<T: Scalar>(
    image: &ImageTensor<T>,
    map: &ConstraintMap<T>,
    eps: f64,
    mode: OverlayMode,
) -> Result<(ImageTensor<T>, Satisfaction)> {
    let sat = satisfied_fraction(map, image, eps)?;
    let (h, w, c) = image.shape();
    let mut data: Vec<T> = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..3 {
                data.push(image.get(y, x, if c == 3 { ch } else { 0 }));
            }
        }
    }
    let reach: isize = match mode {
        OverlayMode::Block => 1,
        OverlayMode::PurePixel => 0,
    };
    for (&(y, x), &ok) in sat.locations.iter().zip(&sat.flags) {
        let color = if ok { GREEN } else { RED };
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (yy, xx) = (y as isize + dy, x as isize + dx);
                if yy < 0 || xx < 0 || yy >= h as isize || xx >= w as isize {
                    continue;
                }
                let base = (yy as usize * w + xx as usize) * 3;
                for ch in 0..3 {
                    data[base + ch] = T::of(color[ch]);
                }
            }
        }
    }
    Ok((ImageTensor::new(h, w, 3, data)?, sat))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_at(v: f64) -> ConstraintMap<f64> {
        ConstraintMap::from_entries(5, 5, 1, &[(2, 2, vec![v])]).unwrap()
    }

    #[test]
    fn block_and_pixel_modes() {
        let img = ImageTensor::<f64>::zeros(5, 5, 1).unwrap();
        let (o, sat) = render_overlay(&img, &map_at(0.0), 0.1, OverlayMode::Block).unwrap();
        assert_eq!(sat.fraction, 1.0);
        assert_eq!(o.channels(), 3);
        for y in 1..4 {
            for x in 1..4 {
                assert_eq!([o.get(y, x, 0), o.get(y, x, 1), o.get(y, x, 2)], GREEN);
            }
        }
        assert_eq!(o.get(0, 0, 1), 0.0);
        let (p, _) = render_overlay(&img, &map_at(0.0), 0.1, OverlayMode::PurePixel).unwrap();
        assert_eq!(p.get(2, 2, 1), 1.0);
        assert_eq!(p.get(1, 2, 1), 0.0);
    }

    #[test]
    fn error_equal_to_eps_is_red() {
        let img = ImageTensor::<f64>::zeros(5, 5, 1).unwrap();
        let v = 0.1f64.sqrt();
        let (o, sat) = render_overlay(&img, &map_at(v), v * v, OverlayMode::PurePixel).unwrap();
        assert_eq!(sat.fraction, 0.0);
        assert_eq!(o.get(2, 2, 0), 1.0);
    }
}
