//! Regenerates the images and homography under `assets/`.
//!
//! `cargo run -p mrnet --example make_assets -- <out_dir>`

use std::path::PathBuf;

use mrnet::data::save_image;
use mrnet::ImageGrid;

/// 8×8 checkerboard laid over a diagonal ramp, values in [0.1, 0.95].
fn composite(res: usize) -> ImageGrid {
    let cell = res / 8;
    let span = (2 * (res - 1)) as f64;
    ImageGrid::from_fn(res, res, 1, |x, y, _| {
        let check = ((x / cell + y / cell) % 2) as f64;
        0.1 + 0.45 * check + 0.4 * (x + y) as f64 / span
    })
    .expect("values in range")
}

fn checkerboard(res: usize, cells: usize) -> ImageGrid {
    let cell = res / cells;
    ImageGrid::from_fn(res, res, 1, |x, y, _| ((x / cell + y / cell) % 2) as f64).expect("binary image")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "assets".into()));
    std::fs::create_dir_all(&out)?;
    save_image(&composite(128), out.join("composite_128.pgm"))?;
    save_image(&composite(128), out.join("composite_128.png"))?;
    save_image(&checkerboard(64, 16), out.join("checkerboard_64.pgm"))?;
    // ground plane receding toward the top of the screen: w runs from 0.25 on
    // the top row to 1 on the bottom row and the frame stays inside the texture
    let h = [0.25, 0.0, 0.0, 0.0, 0.625, 0.375, 0.0, 0.375, 0.625];
    std::fs::write(out.join("perspective.json"), format!("{h:?}\n"))?;
    Ok(())
}
