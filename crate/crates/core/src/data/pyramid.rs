//! Gaussian pyramids (blur + decimate) and towers (blur only).
//!
//! The low-pass filter is the separable 5-tap binomial kernel
//! `(1, 4, 6, 4, 1) / 16` with mirrored borders (`… 2 1 | 0 1 2 …`, the edge
//! sample is not repeated). Decimation keeps even indices.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{save_image, ImageGrid};
use crate::error::{contract, Error, Result};

pub const BINOMIAL_5: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PyramidKind {
    #[default]
    Pyramid,
    Tower,
}

/// Levels ordered coarse to fine.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    pub levels: Vec<ImageGrid>,
    pub kind: PyramidKind,
}

impl Pyramid {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn finest(&self) -> &ImageGrid {
        self.levels.last().expect("pyramid has levels")
    }

    /// Writes `level_0.png`, `level_1.png`, … (coarse first) into `dir`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.levels
            .iter()
            .enumerate()
            .map(|(i, level)| {
                let p = dir.join(format!("level_{i}.png"));
                save_image(level, &p)?;
                Ok(p)
            })
            .collect()
    }
}

/// Reflects `i` into `0..n` without repeating the edge sample.
#[inline]
fn mirror(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m >= n as isize { period - m } else { m }) as usize
}

/// Separable binomial blur with taps spaced `step` samples apart.
pub fn blur(grid: &ImageGrid, step: usize) -> ImageGrid {
    let (w, h, c) = (grid.width(), grid.height(), grid.channels());
    let step = step as isize;
    let src = grid.samples();
    let mut rows = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, tap) in BINOMIAL_5.iter().enumerate() {
                    let xi = mirror(x as isize + (k as isize - 2) * step, w);
                    acc += tap * src[(y * w + xi) * c + ch];
                }
                rows[(y * w + x) * c + ch] = acc;
            }
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, tap) in BINOMIAL_5.iter().enumerate() {
                    let yi = mirror(y as isize + (k as isize - 2) * step, h);
                    acc += tap * rows[(yi * w + x) * c + ch];
                }
                out[(y * w + x) * c + ch] = acc.clamp(0.0, 1.0);
            }
        }
    }
    ImageGrid::from_parts_unchecked(w, h, c, out)
}

/// Blur then keep even rows and columns: half the width and height.
pub fn gaussian_reduce(grid: &ImageGrid) -> Result<ImageGrid> {
    let (w, h, c) = (grid.width(), grid.height(), grid.channels());
    if w % 2 != 0 || h % 2 != 0 {
        return Err(contract(format!("cannot halve a {w}x{h} image")));
    }
    let blurred = blur(grid, 1);
    let (w2, h2) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(w2 * h2 * c);
    for y in 0..h2 {
        for x in 0..w2 {
            for ch in 0..c {
                out.push(blurred.get(2 * x, 2 * y, ch));
            }
        }
    }
    Ok(ImageGrid::from_parts_unchecked(w2, h2, c, out))
}

/// Dyadic pyramid from `base_res` up to the input size, coarse first.
pub fn build_pyramid(grid: &ImageGrid, base_res: usize) -> Result<Pyramid> {
    let side = grid.width();
    if grid.height() != side {
        return Err(Error::Config(format!("pyramid input must be square, got {}x{}", side, grid.height())));
    }
    if !side.is_power_of_two() {
        return Err(Error::Config(format!("pyramid input side {side} is not a power of two")));
    }
    if !base_res.is_power_of_two() || base_res > side {
        return Err(Error::Config(format!("base resolution {base_res} must be a power of two no larger than {side}")));
    }
    let mut levels = vec![grid.clone()];
    while levels.last().expect("nonempty").width() > base_res {
        let next = gaussian_reduce(levels.last().expect("nonempty"))?;
        levels.push(next);
    }
    levels.reverse();
    Ok(Pyramid { levels, kind: PyramidKind::Pyramid })
}

/// Full-resolution blur cascade, most blurred first. The finest level is the
/// input itself; each coarser level applies one more blur with the tap spacing
/// doubled, so level `k` matches the band of pyramid level `k`.
pub fn build_tower(grid: &ImageGrid, num_levels: usize) -> Result<Pyramid> {
    if num_levels == 0 {
        return Err(Error::Config("a tower needs at least one level".into()));
    }
    let mut levels = vec![grid.clone()];
    for j in 0..num_levels - 1 {
        let next = blur(levels.last().expect("nonempty"), 1 << j);
        levels.push(next);
    }
    levels.reverse();
    Ok(Pyramid { levels, kind: PyramidKind::Tower })
}

/// How to bring an arbitrary image to a square power-of-two side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FitPolicy {
    /// Mirror-pad (centered) up to the next power of two.
    #[default]
    Pad,
    /// Center-crop down to the previous power of two.
    Crop,
}

pub fn fit_power_of_two(grid: &ImageGrid, policy: FitPolicy) -> ImageGrid {
    let (w, h, c) = (grid.width(), grid.height(), grid.channels());
    if w == h && w.is_power_of_two() {
        return grid.clone();
    }
    let side = match policy {
        FitPolicy::Pad => w.max(h).next_power_of_two(),
        FitPolicy::Crop => 1 << (usize::BITS - 1 - w.min(h).leading_zeros()),
    };
    let off_x = (w as isize - side as isize) / 2;
    let off_y = (h as isize - side as isize) / 2;
    let mut out = Vec::with_capacity(side * side * c);
    for y in 0..side {
        let sy = mirror(y as isize + off_y, h);
        for x in 0..side {
            let sx = mirror(x as isize + off_x, w);
            for ch in 0..c {
                out.push(grid.get(sx, sy, ch));
            }
        }
    }
    ImageGrid::from_parts_unchecked(side, side, c, out)
}
