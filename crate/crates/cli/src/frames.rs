//! Frame decoding and overlay rendering.

use std::path::Path;

use enkcf::{Error, Image, Rect};
use image::{DynamicImage, Rgb, RgbImage};

const BOX_COLOR: Rgb<u8> = Rgb([255, 32, 32]);
const BOX_THICKNESS: i64 = 2;

/// Decodes an 8-bit frame. Single-channel files stay grayscale; everything
/// else is converted to RGB.
pub fn load(path: &Path) -> enkcf::Result<Image> {
    let img = image::open(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(g) => Image::gray(w, h, g.into_raw()),
        DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_) => Image::gray(w, h, img.to_luma8().into_raw()),
        other => Image::rgb(w, h, other.to_rgb8().into_raw()),
    }
}

/// Decodes `path` as RGB and draws `rect` on it.
pub fn overlay(path: &Path, rect: &Rect) -> anyhow::Result<RgbImage> {
    let mut img = image::open(path)?.to_rgb8();
    draw_rect(&mut img, rect);
    Ok(img)
}

pub fn draw_rect(img: &mut RgbImage, rect: &Rect) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0 = rect.x.round() as i64;
    let y0 = rect.y.round() as i64;
    let x1 = (rect.x + rect.width).round() as i64 - 1;
    let y1 = (rect.y + rect.height).round() as i64 - 1;
    let mut put = |x: i64, y: i64| {
        if (0..w).contains(&x) && (0..h).contains(&y) {
            img.put_pixel(x as u32, y as u32, BOX_COLOR);
        }
    };
    for t in 0..BOX_THICKNESS {
        for x in x0..=x1 {
            put(x, y0 + t);
            put(x, y1 - t);
        }
        for y in y0..=y1 {
            put(x0 + t, y);
            put(x1 - t, y);
        }
    }
}
