//! Images, Gaussian pyramids and towers, and training samples.

mod io;
mod pyramid;
mod samples;

pub use io::{load_image, save_image};
pub use pyramid::{
    blur, build_pyramid, build_tower, fit_power_of_two, gaussian_reduce, FitPolicy, Pyramid, PyramidKind,
    BINOMIAL_5,
};
pub use samples::{coords_grid, coords_grid_wh, make_samples, SampleSet, Sampler};

use ndarray::Array2;

use crate::error::{contract, Result};

/// A sampled image with intensities in `[0, 1]`, stored row-major with
/// interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(contract("image dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(contract(format!("{channels} channels; only 1 or 3 are supported")));
        }
        if samples.len() != width * height * channels {
            return Err(contract(format!(
                "{} samples for a {width}x{height}x{channels} image",
                samples.len()
            )));
        }
        if let Some(v) = samples.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(contract(format!("sample {v} outside [0, 1]")));
        }
        Ok(Self { width, height, channels, samples })
    }

    /// Builds an image from `f(x, y, channel)`, clamping into `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    samples.push(f(x, y, c).clamp(0.0, 1.0));
                }
            }
        }
        Self::new(width, height, channels, samples)
    }

    pub fn constant(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Values clamped into `[0, 1]`; NaN becomes 0.
    pub fn from_clamped(width: usize, height: usize, channels: usize, values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let samples = values
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Self::new(width, height, channels, samples)
    }

    /// Values already known to lie in `[0, 1]` (output of convex filters).
    pub(crate) fn from_parts_unchecked(width: usize, height: usize, channels: usize, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), width * height * channels);
        Self { width, height, channels, samples }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.samples[(y * self.width + x) * self.channels + c]
    }

    /// One channel as a single-channel image.
    pub fn channel(&self, c: usize) -> ImageGrid {
        let samples = self.samples.iter().skip(c).step_by(self.channels).copied().collect();
        Self::from_parts_unchecked(self.width, self.height, 1, samples)
    }

    /// Interleaves single-channel images of equal size.
    pub fn from_channels(planes: &[ImageGrid]) -> Result<ImageGrid> {
        let first = planes.first().ok_or_else(|| contract("no channels"))?;
        if planes.iter().any(|p| p.channels != 1 || p.width != first.width || p.height != first.height) {
            return Err(contract("channel planes must be single-channel and equally sized"));
        }
        let n = first.pixel_count();
        let samples = (0..n).flat_map(|i| planes.iter().map(move |p| p.samples[i])).collect();
        Self::new(first.width, first.height, planes.len(), samples)
    }

    /// Pixels as rows of a `pixels × channels` matrix.
    pub fn to_matrix(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.pixel_count(), self.channels), self.samples.clone()).expect("consistent shape")
    }
}
