//! Loads a PNG/PPM frame (or draws a test pattern) and resizes it
//! bilinearly, writing the result next to the system temp dir.
//!
//!     cargo run --release --example frame_resize [-- frame.png [size]]

use std::path::PathBuf;

use camid::frames::{load_frame, resize_bilinear, save_frame, RgbImage};

fn pattern(w: usize, h: usize) -> camid::Result<RgbImage> {
    let mut px = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let checker = if (x / 8 + y / 8) % 2 == 0 { 1.0 } else { 0.0 };
            px.extend([x as f64 / (w - 1) as f64, y as f64 / (h - 1) as f64, checker]);
        }
    }
    RgbImage::new(w, h, px)
}

fn main() -> camid::Result<()> {
    let mut args = std::env::args().skip(1);
    let img = match args.next() {
        Some(p) => load_frame(&PathBuf::from(p))?,
        None => pattern(96, 64)?,
    };
    let size: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(128);
    let out = resize_bilinear(&img, size, size)?;
    println!("{}x{} -> {}x{}", img.width(), img.height(), out.width(), out.height());
    for (x, y) in [(0, 0), (size - 1, 0), (0, size - 1), (size - 1, size - 1)] {
        let [r, g, b] = out.pixel(x, y);
        println!("  pixel ({x:>3},{y:>3}) = [{r:.3}, {g:.3}, {b:.3}]");
    }
    let path = std::env::temp_dir().join("camid_resized.png");
    save_frame(&path, &out)?;
    println!("wrote {}", path.display());
    Ok(())
}
