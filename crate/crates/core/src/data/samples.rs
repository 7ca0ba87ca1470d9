use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ImageGrid;
use crate::error::{contract, Result};

/// Pixel centers of a `res × res` grid on `[-1, 1]²`, row-major, as `(x, y)`.
pub fn coords_grid(res: usize) -> Array2<f64> {
    coords_grid_wh(res, res)
}

/// Pixel centers of a `width × height` grid. Sample `k` is pixel
/// `(k % width, k / width)`, matching [`ImageGrid`] layout.
pub fn coords_grid_wh(width: usize, height: usize) -> Array2<f64> {
    Array2::from_shape_fn((width * height, 2), |(k, axis)| {
        if axis == 0 {
            center(k % width, width)
        } else {
            center(k / width, height)
        }
    })
}

#[inline]
fn center(j: usize, res: usize) -> f64 {
    -1.0 + (2 * j + 1) as f64 / res as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Every pixel center.
    Regular,
    /// Every `stride`-th pixel along both axes.
    Subsampled(usize),
    /// One uniformly jittered point per pixel cell, target interpolated
    /// bilinearly between pixel centers.
    Stratified(u64),
}

#[derive(Debug, Clone)]
pub struct SampleSet {
    pub coords: Array2<f64>,
    pub targets: Array2<f64>,
    pub level_index: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn make_samples(level: &ImageGrid, level_index: usize, sampler: Sampler) -> Result<SampleSet> {
    let (w, h, c) = (level.width(), level.height(), level.channels());
    let (coords, targets) = match sampler {
        Sampler::Regular => (coords_grid_wh(w, h), level.to_matrix()),
        Sampler::Subsampled(stride) => {
            if stride == 0 || w % stride != 0 || h % stride != 0 {
                return Err(contract(format!("stride {stride} does not divide {w}x{h}")));
            }
            let (sw, sh) = (w / stride, h / stride);
            let coords = Array2::from_shape_fn((sw * sh, 2), |(k, axis)| {
                if axis == 0 {
                    center((k % sw) * stride, w)
                } else {
                    center((k / sw) * stride, h)
                }
            });
            let targets = Array2::from_shape_fn((sw * sh, c), |(k, ch)| {
                level.get((k % sw) * stride, (k / sw) * stride, ch)
            });
            (coords, targets)
        }
        Sampler::Stratified(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (level_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut coords = Array2::zeros((w * h, 2));
            let mut targets = Array2::zeros((w * h, c));
            for k in 0..w * h {
                let (px, py) = (k % w, k / w);
                let fx = px as f64 + rng.gen::<f64>();
                let fy = py as f64 + rng.gen::<f64>();
                coords[[k, 0]] = -1.0 + 2.0 * fx / w as f64;
                coords[[k, 1]] = -1.0 + 2.0 * fy / h as f64;
                for ch in 0..c {
                    targets[[k, ch]] = bilinear(level, fx - 0.5, fy - 0.5, ch);
                }
            }
            (coords, targets)
        }
    };
    Ok(SampleSet { coords, targets, level_index })
}

/// Bilinear interpolation at continuous pixel-center coordinates, clamped to
/// the border.
fn bilinear(img: &ImageGrid, x: f64, y: f64, ch: usize) -> f64 {
    let x = x.clamp(0.0, (img.width() - 1) as f64);
    let y = y.clamp(0.0, (img.height() - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(img.width() - 1), (y0 + 1).min(img.height() - 1));
    let (tx, ty) = (x - x0 as f64, y - y0 as f64);
    let top = img.get(x0, y0, ch) * (1.0 - tx) + img.get(x1, y0, ch) * tx;
    let bottom = img.get(x0, y1, ch) * (1.0 - tx) + img.get(x1, y1, ch) * tx;
    top * (1.0 - ty) + bottom * ty
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_grids() {
        assert_eq!(coords_grid(1), ndarray::array![[0.0, 0.0]]);
        let g = coords_grid(2);
        assert_eq!(g, ndarray::array![[-0.5, -0.5], [0.5, -0.5], [-0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn sample_counts() {
        let img = ImageGrid::from_fn(8, 8, 1, |x, y, _| (x + 8 * y) as f64 / 63.0).unwrap();
        assert_eq!(make_samples(&img, 0, Sampler::Regular).unwrap().len(), 64);
        let sub = make_samples(&img, 0, Sampler::Subsampled(2)).unwrap();
        assert_eq!(sub.len(), 16);
        // second subsample is pixel (2, 0)
        assert_eq!(sub.targets[[1, 0]], img.get(2, 0, 0));
        assert_eq!(sub.coords[[1, 0]], center(2, 8));
        assert!(make_samples(&img, 0, Sampler::Subsampled(3)).is_err());
        assert!(make_samples(&img, 0, Sampler::Subsampled(0)).is_err());
    }

    #[test]
    fn regular_samples_follow_pixel_layout() {
        let img = ImageGrid::from_fn(4, 3, 3, |x, y, c| (x + 4 * y) as f64 / 12.0 + c as f64 * 0.01).unwrap();
        let s = make_samples(&img, 2, Sampler::Regular).unwrap();
        assert_eq!(s.level_index, 2);
        for k in 0..12 {
            let (x, y) = (k % 4, k / 4);
            assert_eq!(s.coords[[k, 0]], center(x, 4));
            assert_eq!(s.coords[[k, 1]], center(y, 3));
            for c in 0..3 {
                assert_eq!(s.targets[[k, c]], img.get(x, y, c));
            }
        }
    }

    #[test]
    fn stratified_is_deterministic_per_seed_and_level() {
        let img = ImageGrid::from_fn(8, 8, 1, |x, _, _| x as f64 / 7.0).unwrap();
        let a = make_samples(&img, 1, Sampler::Stratified(5)).unwrap();
        let b = make_samples(&img, 1, Sampler::Stratified(5)).unwrap();
        let c = make_samples(&img, 2, Sampler::Stratified(5)).unwrap();
        assert_eq!(a.coords, b.coords);
        assert_ne!(a.coords, c.coords);
        // a horizontal ramp interpolates linearly inside the interior
        for k in 0..64 {
            let fx = (a.coords[[k, 0]] + 1.0) * 4.0 - 0.5;
            if (0.0..=7.0).contains(&fx) {
                assert!((a.targets[[k, 0]] - fx / 7.0).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn grid_coords_inside_and_symmetric(res in 1usize..64) {
            let g = coords_grid(res);
            prop_assert!(g.iter().all(|v| *v > -1.0 && *v < 1.0));
            let n = res * res;
            for k in 0..n {
                let m = n - 1 - k;
                prop_assert!((g[[k, 0]] + g[[m, 0]]).abs() < 1e-12);
                prop_assert!((g[[k, 1]] + g[[m, 1]]).abs() < 1e-12);
            }
        }

        #[test]
        fn stratified_points_stay_in_their_cells(seed in any::<u64>(), res in 1usize..12) {
            let img = ImageGrid::constant(res, res, 1, 0.5).unwrap();
            let s = make_samples(&img, 0, Sampler::Stratified(seed)).unwrap();
            for k in 0..res * res {
                let (px, py) = ((k % res) as f64, (k / res) as f64);
                let lo_x = -1.0 + 2.0 * px / res as f64;
                let lo_y = -1.0 + 2.0 * py / res as f64;
                let step = 2.0 / res as f64;
                prop_assert!(s.coords[[k, 0]] >= lo_x && s.coords[[k, 0]] < lo_x + step);
                prop_assert!(s.coords[[k, 1]] >= lo_y && s.coords[[k, 1]] < lo_y + step);
            }
        }
    }
}
