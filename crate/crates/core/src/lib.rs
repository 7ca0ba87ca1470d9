//! Multiresolution sinusoidal coordinate networks.
//!
//! An [`MrNet`] represents an image as a sum of band-limited stages trained
//! coarse to fine against a Gaussian pyramid. Because each stage's
//! contribution carries a continuous control weight, the trained network can
//! be evaluated at any resolution and at any fractional level of detail,
//! including a per-pixel level chosen from the footprint of a perspective map.
//!
//! Modules, bottom up:
//!
//! * [`nn`]: dense sine layers, hand-written reverse mode, Adam, MSE.
//! * [`arch`]: S/L/M variants, initialization, model files.
//! * [`data`]: images, pyramids and towers, training samples.
//! * [`train`]: the stage schedule with progressive freezing.
//! * [`render`]: level-of-detail weights, reconstruction and anti-aliased warping.

pub mod arch;
pub mod data;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod render;
pub mod train;

pub use arch::{init_mrnet, ArchConfig, MrNet, StageParams, Variant, Wiring};
pub use data::{ImageGrid, Pyramid, PyramidKind};
pub use error::{Error, Result};
pub use metrics::psnr;
pub use nn::Precision;
pub use render::Homography;
pub use train::{train_schedule, train_schedule_with, train_stage, TrainConfig, TrainReport};
