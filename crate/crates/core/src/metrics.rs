use crate::data::ImageGrid;
use crate::error::{contract, Result};

/// Reported PSNR when two images are identical.
pub const PSNR_CAP_DB: f64 = 200.0;

/// Mean squared error over every sample of two equally sized images.
pub fn mse(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    if (a.width(), a.height(), a.channels()) != (b.width(), b.height(), b.channels()) {
        return Err(contract(format!(
            "cannot compare {}x{}x{} with {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    let sum: f64 = a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.samples().len() as f64)
}

/// PSNR in dB for unit peak, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (-10.0 * mse.log10()).min(PSNR_CAP_DB)
}
