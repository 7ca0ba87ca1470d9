//! Browser demo. A [`Demo`] owns a small network and its training pyramid;
//! the page steps training a few epochs per animation frame and renders the
//! result at any level of detail or through a tilted-plane perspective.
//!
//! Images cross the boundary as RGBA bytes ready for `ImageData`.

use wasm_bindgen::prelude::*;

use mrnet::data::build_pyramid;
use mrnet::render::{reconstruct, warp_render, LevelMapping, WarpOptions};
use mrnet::train::{partial_sum_psnr, StageTrainer};
use mrnet::{init_mrnet, ArchConfig, Homography, ImageGrid, MrNet, Pyramid, TrainConfig};

fn rgba(img: &ImageGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.pixel_count() * 4);
    for k in 0..img.pixel_count() {
        let px = |c: usize| (img.samples()[k * img.channels() + c] * 255.0).round() as u8;
        let (r, g, b) = if img.channels() == 3 { (px(0), px(1), px(2)) } else { (px(0), px(0), px(0)) };
        out.extend_from_slice(&[r, g, b, 255]);
    }
    out
}

fn js_err(e: mrnet::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// The demo images, all square with side `res`.
pub fn pattern(name: &str, res: usize) -> Result<ImageGrid, mrnet::Error> {
    let cell = (res / 8).max(1);
    let span = (2 * res.max(2) - 2) as f64;
    match name {
        "checkerboard" => ImageGrid::from_fn(res, res, 1, |x, y, _| ((x / cell + y / cell) % 2) as f64),
        "composite" => ImageGrid::from_fn(res, res, 1, |x, y, _| {
            0.1 + 0.45 * ((x / cell + y / cell) % 2) as f64 + 0.4 * (x + y) as f64 / span
        }),
        "rings" => ImageGrid::from_fn(res, res, 1, |x, y, _| {
            let (u, v) = (x as f64 / res as f64 - 0.5, y as f64 / res as f64 - 0.5);
            0.5 + 0.5 * (40.0 * (u * u + v * v)).cos()
        }),
        other => Err(mrnet::Error::Config(format!("unknown pattern {other:?}"))),
    }
}

/// Ground plane tilted away from the viewer: `tilt = 0` is the identity and
/// larger values shrink the top of the frame toward a vanishing line. The
/// whole frame stays inside the texture.
pub fn tilt_homography(tilt: f64) -> Result<Homography, mrnet::Error> {
    let far = 1.0 - tilt.clamp(0.0, 0.95);
    Homography::from_row_major(&[
        far,
        0.0,
        0.0,
        0.0,
        (1.0 + far) / 2.0,
        (1.0 - far) / 2.0,
        0.0,
        (1.0 - far) / 2.0,
        (1.0 + far) / 2.0,
    ])
}

#[wasm_bindgen]
pub struct Demo {
    net: MrNet,
    pyramid: Pyramid,
    cfg: TrainConfig,
    trainer: Option<StageTrainer>,
    next_stage: usize,
}

#[wasm_bindgen]
impl Demo {
    /// `res` must be a power of two no smaller than 8; stages run from 8² up.
    #[wasm_bindgen(constructor)]
    pub fn new(pattern_name: &str, res: usize, width: usize, learning_rate: f64, seed: u64) -> Result<Demo, JsError> {
        let img = pattern(pattern_name, res).map_err(js_err)?;
        let pyramid = build_pyramid(&img, 8.min(res)).map_err(js_err)?;
        let arch = ArchConfig { width, ..ArchConfig::with_stages(pyramid.len()) };
        let net = init_mrnet(&arch, seed).map_err(js_err)?;
        let cfg = TrainConfig { learning_rate, batch_size: 1024, max_epochs_per_stage: 300, seed, ..TrainConfig::default() };
        Ok(Demo { net, pyramid, cfg, trainer: None, next_stage: 0 })
    }

    #[wasm_bindgen(getter)]
    pub fn stages(&self) -> usize {
        self.net.num_stages()
    }

    #[wasm_bindgen(getter)]
    pub fn params(&self) -> usize {
        self.net.count_params()
    }

    #[wasm_bindgen(getter)]
    pub fn resolution(&self) -> usize {
        self.pyramid.finest().width()
    }

    /// Stages fully trained so far.
    #[wasm_bindgen(getter)]
    pub fn trained_stages(&self) -> usize {
        self.net.stages().iter().filter(|s| s.frozen).count()
    }

    #[wasm_bindgen(getter)]
    pub fn done(&self) -> bool {
        self.trained_stages() == self.net.num_stages()
    }

    /// Runs up to `epochs` epochs, moving on to the next stage whenever one
    /// finishes. Returns a one-line status.
    pub fn train(&mut self, epochs: usize) -> Result<String, JsError> {
        for _ in 0..epochs {
            if self.trainer.is_none() {
                if self.next_stage == self.net.num_stages() {
                    break;
                }
                let level = &self.pyramid.levels[self.next_stage];
                self.trainer = Some(StageTrainer::new(&self.net, self.next_stage, level, &self.cfg).map_err(js_err)?);
                self.next_stage += 1;
            }
            let trainer = self.trainer.as_mut().expect("set above");
            if trainer.run_epoch(&mut self.net).map_err(js_err)?.is_some() {
                self.trainer.take().expect("running").finish(&mut self.net);
            }
        }
        Ok(self.status())
    }

    pub fn status(&self) -> String {
        match &self.trainer {
            Some(t) => format!(
                "stage {}/{}  epoch {}  loss {:.3e}",
                t.stage() + 1,
                self.net.num_stages(),
                t.epochs_run(),
                t.losses().last().copied().unwrap_or(f64::NAN)
            ),
            None if self.done() => {
                let psnr = partial_sum_psnr(&self.net, &self.pyramid).map(|v| v[v.len() - 1]).unwrap_or(f64::NAN);
                format!("trained, {psnr:.1} dB")
            }
            None => format!("stage {}/{} pending", self.next_stage + 1, self.net.num_stages()),
        }
    }

    /// Network output at `res²` pixels and fractional level `lod` in `[1, N]`.
    pub fn render(&self, res: usize, lod: f64) -> Result<Vec<u8>, JsError> {
        let lod = lod.clamp(1.0, self.net.num_stages() as f64);
        Ok(rgba(&reconstruct(&self.net, res, lod).map_err(js_err)?))
    }

    /// Pyramid level `k` (1-based), the target of stage `k`.
    pub fn level(&self, k: usize) -> Result<Vec<u8>, JsError> {
        let level = self
            .pyramid
            .levels
            .get(k.wrapping_sub(1))
            .ok_or_else(|| JsError::new(&format!("no level {k}")))?;
        Ok(rgba(level))
    }

    /// The texture on a tilted plane, point-sampled or anti-aliased.
    pub fn warp(&self, res: usize, tilt: f64, antialias: bool) -> Result<Vec<u8>, JsError> {
        let h = tilt_homography(tilt).map_err(js_err)?;
        let opts = WarpOptions { out_res: res, tex_res: self.resolution(), antialias, mapping: LevelMapping::Octave };
        Ok(rgba(&warp_render(&self.net, &h, &opts).map_err(js_err)?))
    }
}
