//! Continuous level-of-detail reconstruction and perspective texture warping.
//!
//! A fractional level `λ ∈ [1, N]` turns into control weights by switching
//! stages `1..=⌊λ⌋` fully on and stage `⌊λ⌋ + 1` on by the fractional part.
//! For warping, the level at each screen pixel comes from Heckbert's texel
//! footprint: the longer of the two screen-axis derivatives of the map, in
//! texels per pixel, mapped to levels by octaves.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::arch::MrNet;
use crate::data::{coords_grid, ImageGrid};
use crate::error::{contract, Error, Result};

/// Control weights for fractional level `level` over `n` stages.
pub fn lod_weights(level: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(contract("level-of-detail weights need at least one stage"));
    }
    if level.is_nan() {
        return Err(contract("level of detail is NaN"));
    }
    let level = level.clamp(1.0, n as f64);
    let full = level.floor() as usize;
    let mut w = vec![0.0; n];
    w[..full].fill(1.0);
    if full < n {
        w[full] = level - full as f64;
    }
    Ok(w)
}

/// How a texel footprint becomes a fractional level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum LevelMapping {
    /// One texel per pixel selects the finest stage; each doubling of the
    /// footprint drops one stage.
    #[default]
    Octave,
    /// Affine rescale of the footprint range over the frame onto `[0, N]`,
    /// the largest footprint getting level 0.
    Linear,
}

/// `clamp(N − log2(max(λ, 1)), 1, N)`.
pub fn lambda_to_level(lambda: f64, n: usize) -> f64 {
    let n = n as f64;
    (n - lambda.max(1.0).log2()).clamp(1.0, n)
}

fn lambda_to_level_linear(lambda: f64, min: f64, max: f64, n: usize) -> f64 {
    let n = n as f64;
    if max <= min {
        return n;
    }
    (n * (max - lambda) / (max - min)).clamp(0.0, n)
}

/// Projective map from normalized screen coordinates `(x, y) ∈ [-1, 1]²` to
/// normalized texture coordinates `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Homography {
    m: [[f64; 3]; 3],
}

impl TryFrom<Vec<f64>> for Homography {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Homography::from_row_major(&v)
    }
}

impl From<Homography> for Vec<f64> {
    fn from(h: Homography) -> Self {
        h.m.iter().flatten().copied().collect()
    }
}

impl Homography {
    pub fn identity() -> Self {
        Self { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("homography has non-finite entries".into()));
        }
        let h = Self { m };
        let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 || h.det().abs() <= 1e-12 * scale.powi(3) {
            return Err(Error::Config("homography is singular".into()));
        }
        Ok(h)
    }

    pub fn from_row_major(v: &[f64]) -> Result<Self> {
        if v.len() != 9 {
            return Err(Error::Config(format!("a homography has 9 entries, got {}", v.len())));
        }
        Self::new([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.m
    }

    fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Homogeneous denominator at `(x, y)`.
    pub fn w(&self, x: f64, y: f64) -> f64 {
        self.m[2][0] * x + self.m[2][1] * y + self.m[2][2]
    }

    /// `(u, v)`, or `None` on the horizon line.
    pub fn apply(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let w = self.w(x, y);
        if w.abs() < 1e-12 {
            return None;
        }
        let u = self.m[0][0] * x + self.m[0][1] * y + self.m[0][2];
        let v = self.m[1][0] * x + self.m[1][1] * y + self.m[1][2];
        Some((u / w, v / w))
    }

    /// `[[∂u/∂x, ∂u/∂y], [∂v/∂x, ∂v/∂y]]` in normalized units.
    pub fn jacobian(&self, x: f64, y: f64) -> Result<[[f64; 2]; 2]> {
        let w = self.w(x, y);
        if w.abs() < 1e-12 {
            return Err(Error::Domain(format!("({x}, {y}) lies on the projective horizon")));
        }
        let m = &self.m;
        let nu = m[0][0] * x + m[0][1] * y + m[0][2];
        let nv = m[1][0] * x + m[1][1] * y + m[1][2];
        let w2 = w * w;
        Ok([
            [(m[0][0] * w - nu * m[2][0]) / w2, (m[0][1] * w - nu * m[2][1]) / w2],
            [(m[1][0] * w - nv * m[2][0]) / w2, (m[1][1] * w - nv * m[2][1]) / w2],
        ])
    }
}

/// Pixel coordinate (continuous, pixel `j` spans `[j, j + 1)`) to `[-1, 1]`.
#[inline]
fn to_normalized(p: f64, res: usize) -> f64 {
    -1.0 + 2.0 * p / res as f64
}

/// Texel footprint at screen position `(x, y)` (in pixels) of a
/// `screen_res²` frame showing a `tex_res²` texture.
pub fn heckbert_lambda(h: &Homography, x: f64, y: f64, screen_res: usize, tex_res: usize) -> Result<f64> {
    let j = h.jacobian(to_normalized(x, screen_res), to_normalized(y, screen_res))?;
    // normalized derivative × (tex_res/2 texels per unit) × (2/screen_res units per pixel)
    let k = tex_res as f64 / screen_res as f64;
    let along_x = (j[0][0] * j[0][0] + j[1][0] * j[1][0]).sqrt() * k;
    let along_y = (j[0][1] * j[0][1] + j[1][1] * j[1][1]).sqrt() * k;
    Ok(along_x.max(along_y))
}

/// Per-pixel footprint and level over a square frame. Pixels whose center
/// maps outside the texture have no entry (`None`).
#[derive(Debug, Clone)]
pub struct LodField {
    pub res: usize,
    pub texcoords: Vec<Option<(f64, f64)>>,
    pub lambda: Vec<f64>,
    pub level: Vec<f64>,
}

pub fn lod_field(h: &Homography, res: usize, tex_res: usize, n: usize, mapping: LevelMapping) -> Result<LodField> {
    check_horizon(h, res)?;
    let mut texcoords = Vec::with_capacity(res * res);
    let mut lambda = Vec::with_capacity(res * res);
    for py in 0..res {
        for px in 0..res {
            let (cx, cy) = (px as f64 + 0.5, py as f64 + 0.5);
            let (x, y) = (to_normalized(cx, res), to_normalized(cy, res));
            let uv = h.apply(x, y).filter(|(u, v)| u.abs() <= 1.0 && v.abs() <= 1.0);
            texcoords.push(uv);
            lambda.push(heckbert_lambda(h, cx, cy, res, tex_res)?);
        }
    }
    let inside = || lambda.iter().zip(&texcoords).filter(|(_, t)| t.is_some()).map(|(l, _)| *l);
    let level = match mapping {
        LevelMapping::Octave => lambda.iter().map(|&l| lambda_to_level(l, n)).collect(),
        LevelMapping::Linear => {
            let min = inside().fold(f64::INFINITY, f64::min);
            let max = inside().fold(f64::NEG_INFINITY, f64::max);
            lambda.iter().map(|&l| lambda_to_level_linear(l, min, max, n)).collect()
        }
    };
    Ok(LodField { res, texcoords, lambda, level })
}

/// Fails when the horizon `w = 0` crosses or touches the frame.
fn check_horizon(h: &Homography, res: usize) -> Result<()> {
    let mut offending = Vec::new();
    let mut sign = 0.0;
    for py in 0..res {
        for px in 0..res {
            let w = h.w(to_normalized(px as f64 + 0.5, res), to_normalized(py as f64 + 0.5, res));
            if sign == 0.0 && w.abs() >= 1e-12 {
                sign = w.signum();
            }
            if w.abs() < 1e-12 || w.signum() != sign {
                offending.push((px, py));
            }
        }
    }
    if offending.is_empty() {
        return Ok(());
    }
    let listed: Vec<String> = offending.iter().take(8).map(|(x, y)| format!("({x}, {y})")).collect();
    Err(Error::Domain(format!(
        "projective horizon inside the frame at {} pixel(s): {}{}",
        offending.len(),
        listed.join(", "),
        if offending.len() > 8 { ", …" } else { "" }
    )))
}

/// Unclamped network output at the pixel centers of an `out_res²` grid.
pub fn reconstruct_raw(net: &MrNet, out_res: usize, level: f64) -> Result<Array2<f64>> {
    if out_res == 0 {
        return Err(contract("output resolution must be positive"));
    }
    let w = lod_weights(level, net.num_stages())?;
    net.forward(coords_grid(out_res).view(), &w)
}

/// Image at resolution `out_res` and fractional level `level`, clamped to
/// `[0, 1]`. Resolutions above the training resolution magnify.
pub fn reconstruct(net: &MrNet, out_res: usize, level: f64) -> Result<ImageGrid> {
    let raw = reconstruct_raw(net, out_res, level)?;
    ImageGrid::from_clamped(out_res, out_res, net.channels(), raw)
}

/// Level for showing a `source_res²` image in `out_res²` pixels.
pub fn minification_level(source_res: usize, out_res: usize, n: usize) -> f64 {
    lambda_to_level(source_res as f64 / out_res as f64, n)
}

/// Anti-aliased reduction of a `source_res²` model to `out_res²` pixels.
pub fn minify(net: &MrNet, source_res: usize, out_res: usize) -> Result<ImageGrid> {
    reconstruct(net, out_res, minification_level(source_res, out_res, net.num_stages()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpOptions {
    pub out_res: usize,
    /// Resolution the model was trained at, for footprint units.
    pub tex_res: usize,
    pub antialias: bool,
    pub mapping: LevelMapping,
}

/// Renders the texture seen through `h`. Without anti-aliasing every pixel
/// point-samples the full-detail network; with it, every pixel blends stages
/// by its own footprint level. Pixels mapping outside the texture are 0.
pub fn warp_render(net: &MrNet, h: &Homography, opts: &WarpOptions) -> Result<ImageGrid> {
    let res = opts.out_res;
    if res == 0 || opts.tex_res == 0 {
        return Err(contract("resolutions must be positive"));
    }
    let n = net.num_stages();
    let field = lod_field(h, res, opts.tex_res, n, opts.mapping)?;
    let inside: Vec<usize> = (0..res * res).filter(|&k| field.texcoords[k].is_some()).collect();
    let c = net.channels();
    let mut out = vec![0.0; res * res * c];
    if inside.is_empty() {
        return ImageGrid::new(res, res, c, out);
    }
    let coords = Array2::from_shape_fn((inside.len(), 2), |(r, a)| {
        let (u, v) = field.texcoords[inside[r]].expect("inside");
        if a == 0 { u } else { v }
    });
    let details = net.stage_outputs(coords.view())?.details;
    let ones = vec![1.0; n];
    for (r, &k) in inside.iter().enumerate() {
        let w = if opts.antialias { lod_weights(field.level[k], n)? } else { ones.clone() };
        for ch in 0..c {
            let mut acc = 0.0;
            for ((g, wi), st) in details.iter().zip(&w).zip(net.stages()) {
                acc += wi * st.alpha * g[[r, ch]];
            }
            out[k * c + ch] = acc;
        }
    }
    ImageGrid::from_clamped(res, res, c, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{doubling_bands, init_mrnet, ArchConfig};
    use proptest::prelude::*;

    #[test]
    fn weights_cases() {
        assert_eq!(lod_weights(4.0, 4).unwrap(), vec![1.0; 4]);
        assert_eq!(lod_weights(1.0, 4).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(lod_weights(0.3, 4).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(lod_weights(9.0, 4).unwrap(), vec![1.0; 4]);
        assert!(lod_weights(2.0, 0).is_err());
        assert!(lod_weights(f64::NAN, 3).is_err());
    }

    #[test]
    fn weights_match_scalar_rule() {
        // independent restatement: w_i = clamp(λ − (i − 1), 0, 1) for 1-based i
        for &(l, n) in &[(2.5, 4usize), (1.25, 3), (6.99, 7), (3.0, 5)] {
            let expect: Vec<f64> = (1..=n).map(|i| (l - (i as f64 - 1.0)).clamp(0.0, 1.0)).collect();
            let got = lod_weights(l, n).unwrap();
            for (a, b) in got.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        assert_eq!(lod_weights(2.5, 4).unwrap(), vec![1.0, 1.0, 0.5, 0.0]);
    }

    #[test]
    fn octave_levels() {
        assert_eq!(lambda_to_level(1.0, 7), 7.0);
        assert_eq!(lambda_to_level(2.0, 7), 6.0);
        assert_eq!(lambda_to_level(64.0, 7), 1.0);
        assert_eq!(lambda_to_level(0.25, 7), 7.0);
        assert_eq!(lambda_to_level(1e9, 7), 1.0);
    }

    #[test]
    fn linear_levels() {
        assert_eq!(lambda_to_level_linear(1.0, 1.0, 5.0, 4), 4.0);
        assert_eq!(lambda_to_level_linear(5.0, 1.0, 5.0, 4), 0.0);
        assert_eq!(lambda_to_level_linear(3.0, 1.0, 5.0, 4), 2.0);
        assert_eq!(lambda_to_level_linear(3.0, 3.0, 3.0, 4), 4.0);
    }

    #[test]
    fn heckbert_closed_forms() {
        let id = Homography::identity();
        assert!((heckbert_lambda(&id, 3.5, 10.5, 64, 64).unwrap() - 1.0).abs() < 1e-15);
        assert!((heckbert_lambda(&id, 3.5, 10.5, 64, 256).unwrap() - 4.0).abs() < 1e-15);
        let s2 = Homography::from_row_major(&[2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((heckbert_lambda(&s2, 20.5, 1.5, 128, 128).unwrap() - 2.0).abs() < 1e-15);
        // rotation by 30 degrees scaled by 3: isometry times 3
        let (c, s) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
        let r = Homography::from_row_major(&[3.0 * c, -3.0 * s, 0.1, 3.0 * s, 3.0 * c, -0.2, 0.0, 0.0, 1.0]).unwrap();
        for (x, y) in [(0.5, 0.5), (31.0, 7.0), (63.5, 63.5)] {
            assert!((heckbert_lambda(&r, x, y, 64, 64).unwrap() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perspective_footprint_grows_along_x() {
        let h = Homography::from_row_major(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.8, 0.0, 1.0]).unwrap();
        // with g > 0, moving toward -x shrinks w and magnifies the footprint
        let lams: Vec<f64> = (0..32).map(|i| heckbert_lambda(&h, i as f64 * 2.0 + 0.5, 16.0, 64, 64).unwrap()).collect();
        assert!(lams.windows(2).all(|p| p[1] < p[0]));
        let flipped = Homography::from_row_major(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -0.8, 0.0, 1.0]).unwrap();
        let lams: Vec<f64> = (0..32).map(|i| heckbert_lambda(&flipped, i as f64 * 2.0 + 0.5, 16.0, 64, 64).unwrap()).collect();
        assert!(lams.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn homography_validation() {
        assert!(Homography::from_row_major(&[1.0; 9]).is_err());
        assert!(Homography::from_row_major(&[1.0, 0.0]).is_err());
        assert!(Homography::from_row_major(&[0.0; 9]).is_err());
        let h = Homography::from_row_major(&[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(h.jacobian(0.0, 0.5), Err(Error::Domain(_))));
        let json: Homography = serde_json::from_str("[1,0,0,0,1,0,0,0,1]").unwrap();
        assert_eq!(json, Homography::identity());
        assert!(serde_json::from_str::<Homography>("[1,0,0]").is_err());
    }

    fn net(stages: usize) -> MrNet {
        init_mrnet(&ArchConfig { width: 8, bands: doubling_bands(2.0, stages), ..ArchConfig::default() }, 4).unwrap()
    }

    #[test]
    fn integer_levels_are_partial_sums() {
        let n = net(3);
        let coords = coords_grid(9);
        for k in 1..=3 {
            let raw = reconstruct_raw(&n, 9, k as f64).unwrap();
            let w: Vec<f64> = (0..3).map(|i| if i < k { 1.0 } else { 0.0 }).collect();
            assert_eq!(raw, n.forward(coords.view(), &w).unwrap());
        }
    }

    #[test]
    fn magnification_stays_in_range() {
        let img = reconstruct(&net(2), 40, 2.0).unwrap();
        assert_eq!((img.width(), img.height()), (40, 40));
        assert!(img.samples().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(reconstruct(&net(2), 0, 2.0).is_err());
    }

    #[test]
    fn identity_warp_matches_reconstruct() {
        let n = net(3);
        let rec = reconstruct(&n, 16, 3.0).unwrap();
        for antialias in [false, true] {
            let opts = WarpOptions { out_res: 16, tex_res: 16, antialias, mapping: LevelMapping::Octave };
            assert_eq!(warp_render(&n, &Homography::identity(), &opts).unwrap(), rec);
        }
    }

    #[test]
    fn outside_texture_is_background() {
        let shift = Homography::from_row_major(&[1.0, 0.0, 5.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let opts = WarpOptions { out_res: 8, tex_res: 8, antialias: true, mapping: LevelMapping::Octave };
        let img = warp_render(&net(2), &shift, &opts).unwrap();
        assert!(img.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn horizon_in_frame_is_reported() {
        let h = Homography::from_row_major(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 2.0, 0.0, 1.0]).unwrap();
        let opts = WarpOptions { out_res: 8, tex_res: 8, antialias: false, mapping: LevelMapping::Octave };
        match warp_render(&net(2), &h, &opts) {
            Err(Error::Domain(msg)) => assert!(msg.contains("pixel"), "{msg}"),
            other => panic!("expected a domain error, got {other:?}"),
        }
    }

    #[test]
    fn affine_footprint_is_constant() {
        let h = Homography::from_row_major(&[1.5, 0.3, 0.1, -0.2, 0.7, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let f = lod_field(&h, 16, 32, 4, LevelMapping::Octave).unwrap();
        assert!(f.lambda.iter().all(|&l| (l - f.lambda[0]).abs() < 1e-12));
    }

    #[test]
    fn minification_level_for_halving() {
        assert_eq!(minification_level(128, 64, 5), 4.0);
        assert_eq!(minification_level(128, 128, 5), 5.0);
        let img = minify(&net(3), 64, 16).unwrap();
        assert_eq!(img.width(), 16);
    }

    proptest! {
        #[test]
        fn weights_are_monotone_and_bounded(l in 0.0f64..10.0, n in 1usize..9) {
            let w = lod_weights(l, n).unwrap();
            prop_assert!(w.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!(w.windows(2).all(|p| p[1] <= p[0]));
            let w2 = lod_weights(l + 0.01, n).unwrap();
            let (s1, s2): (f64, f64) = (w.iter().sum(), w2.iter().sum());
            prop_assert!(s2 >= s1 && s2 - s1 <= 0.01 + 1e-12);
        }
    }
}
