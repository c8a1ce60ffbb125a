use super::{Image, Roi};
use crate::error::{Error, Result};

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Cuts the ROI out of `image`. Pixels outside the frame replicate the
/// nearest edge pixel.
pub fn crop_patch(image: &Image, roi: &Roi) -> Result<Image> {
    roi.validate()?;
    let (pw, ph) = roi.patch_size();
    let (x0, y0) = roi.patch_origin();
    let ch = image.channels();
    let mut data = Vec::with_capacity(pw * ph * ch);
    let cols: Vec<usize> = (0..pw)
        .map(|i| clamp_index(x0 + i as isize, image.width()))
        .collect();
    for j in 0..ph {
        let sy = clamp_index(y0 + j as isize, image.height());
        for &sx in &cols {
            data.extend_from_slice(image.pixel(sx, sy));
        }
    }
    Image::new(pw, ph, ch, data)
}

/// Source sample positions for bilinear resampling of `src` pixels onto
/// `dst` pixels (pixel-center alignment, clamped at the ends).
fn sample_axis(src: usize, dst: usize) -> Vec<(usize, usize, f32)> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src - 1) as f64);
            let a = s.floor() as usize;
            let b = (a + 1).min(src - 1);
            (a, b, (s - a as f64) as f32)
        })
        .collect()
}

#[inline]
fn blend(p00: u8, p10: u8, p01: u8, p11: u8, fx: f32, fy: f32) -> u8 {
    let top = p00 as f32 + (p10 as f32 - p00 as f32) * fx;
    let bottom = p01 as f32 + (p11 as f32 - p01 as f32) * fx;
    // Non-negative, so adding one half and truncating rounds to nearest.
    ((top + (bottom - top) * fy).clamp(0.0, 255.0) + 0.5) as u8
}

fn check_target(target_w: usize, target_h: usize) -> Result<()> {
    if target_w < 4 || target_h < 4 {
        return Err(Error::dim(format!(
            "resize target {}x{} below 4x4",
            target_w, target_h
        )));
    }
    Ok(())
}

/// Bilinear resampling to exactly `target_w × target_h`.
pub fn resize_patch(patch: &Image, target_w: usize, target_h: usize) -> Result<Image> {
    check_target(target_w, target_h)?;
    if patch.dims() == (target_w, target_h) {
        return Ok(patch.clone());
    }
    let xs = sample_axis(patch.width(), target_w);
    let ys = sample_axis(patch.height(), target_h);
    let ch = patch.channels();
    let mut data = Vec::with_capacity(target_w * target_h * ch);
    for &(ya, yb, fy) in &ys {
        for &(xa, xb, fx) in &xs {
            let (p00, p10) = (patch.pixel(xa, ya), patch.pixel(xb, ya));
            let (p01, p11) = (patch.pixel(xa, yb), patch.pixel(xb, yb));
            for c in 0..ch {
                data.push(blend(p00[c], p10[c], p01[c], p11[c], fx, fy));
            }
        }
    }
    Image::new(target_w, target_h, ch, data)
}

/// `resize_patch(crop_patch(image, roi), target_w, target_h)` without
/// materialising the intermediate crop. Bit-identical to the two-step path.
pub fn sample_patch(image: &Image, roi: &Roi, target_w: usize, target_h: usize) -> Result<Image> {
    roi.validate()?;
    check_target(target_w, target_h)?;
    let (pw, ph) = roi.patch_size();
    if (pw, ph) == (target_w, target_h) {
        return crop_patch(image, roi);
    }
    let (x0, y0) = roi.patch_origin();
    let to_x = |i: usize| clamp_index(x0 + i as isize, image.width());
    let to_y = |j: usize| clamp_index(y0 + j as isize, image.height());
    let xs: Vec<(usize, usize, f32)> = sample_axis(pw, target_w)
        .into_iter()
        .map(|(a, b, f)| (to_x(a), to_x(b), f))
        .collect();
    let ys: Vec<(usize, usize, f32)> = sample_axis(ph, target_h)
        .into_iter()
        .map(|(a, b, f)| (to_y(a), to_y(b), f))
        .collect();
    let ch = image.channels();
    let stride = image.width() * ch;
    let src = image.data();
    let mut data = Vec::with_capacity(target_w * target_h * ch);
    for &(ya, yb, fy) in &ys {
        let (ra, rb) = (&src[ya * stride..][..stride], &src[yb * stride..][..stride]);
        for &(xa, xb, fx) in &xs {
            let (a, b) = (xa * ch, xb * ch);
            for c in 0..ch {
                data.push(blend(ra[a + c], ra[b + c], rb[a + c], rb[b + c], fx, fy));
            }
        }
    }
    Image::new(target_w, target_h, ch, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, 1, |x, y, px| px[0] = ((x + 2 * y) % 256) as u8).unwrap()
    }

    #[test]
    fn inside_crop_is_a_copy() {
        let img = ramp(40, 30);
        let roi = Roi::new(20.0, 15.0, 10.0, 6.0).unwrap();
        let p = crop_patch(&img, &roi).unwrap();
        assert_eq!(p.dims(), (10, 6));
        for y in 0..6 {
            for x in 0..10 {
                assert_eq!(p.pixel(x, y), img.pixel(15 + x, 12 + y));
            }
        }
    }

    #[test]
    fn crop_at_origin_replicates_edges() {
        let img = ramp(20, 20);
        let roi = Roi::new(0.0, 0.0, 8.0, 8.0).unwrap();
        let p = crop_patch(&img, &roi).unwrap();
        // Patch spans pixels -4..4; the out-of-frame part repeats row/column 0.
        for y in 0..8 {
            for x in 0..8 {
                let sx = (x as isize - 4).max(0) as usize;
                let sy = (y as isize - 4).max(0) as usize;
                assert_eq!(p.pixel(x, y), img.pixel(sx, sy));
            }
        }
    }

    #[test]
    fn oversized_roi_border_rows_match_image_border() {
        let img = Image::from_fn(100, 100, 3, |x, y, px| {
            px.copy_from_slice(&[(x * 2) as u8, (y * 2) as u8, ((x + y) % 256) as u8])
        })
        .unwrap();
        let roi = Roi::new(50.0, 50.0, 200.0, 200.0).unwrap();
        let p = crop_patch(&img, &roi).unwrap();
        assert_eq!(p.dims(), (200, 200));
        // Patch covers -50..150; rows 0..=50 replicate image row 0.
        for py in [0usize, 25, 50] {
            for px in 50..150 {
                assert_eq!(p.pixel(px, py), img.pixel(px - 50, 0));
            }
        }
        for py in [149usize, 175, 199] {
            for px in 50..150 {
                assert_eq!(p.pixel(px, py), img.pixel(px - 50, 99));
            }
        }
    }

    #[test]
    fn zero_area_roi_is_rejected() {
        let img = ramp(10, 10);
        let roi = Roi {
            center_x: 5.0,
            center_y: 5.0,
            width: 0.0,
            height: 3.0,
        };
        assert!(crop_patch(&img, &roi).is_err());
    }

    #[test]
    fn same_size_resize_is_identity() {
        let img = ramp(17, 9);
        assert_eq!(resize_patch(&img, 17, 9).unwrap(), img);
    }

    #[test]
    fn constant_patch_stays_constant() {
        let img = Image::rgb(13, 7, vec![77; 13 * 7 * 3]).unwrap();
        let r = resize_patch(&img, 40, 21).unwrap();
        assert!(r.data().iter().all(|&v| v == 77));
    }

    #[test]
    fn checkerboard_upsample_matches_hand_weights() {
        // [[0, 200], [200, 0]] → 4x4. Source positions per output index are
        // (i + 0.5)/2 - 0.5 clamped: 0, 0.25, 0.75, 1.
        let img = Image::gray(2, 2, vec![0, 200, 200, 0]).unwrap();
        let r = resize_patch(&img, 4, 4).unwrap();
        let pos = [0.0, 0.25, 0.75, 1.0];
        for (j, &fy) in pos.iter().enumerate() {
            for (i, &fx) in pos.iter().enumerate() {
                let top = 0.0 + 200.0 * fx;
                let bottom = 200.0 - 200.0 * fx;
                let want: f64 = top + (bottom - top) * fy;
                assert_eq!(r.pixel(i, j)[0] as f64, want.round(), "({}, {})", i, j);
            }
        }
    }

    #[test]
    fn fused_sampling_is_bit_identical() {
        let img = Image::from_fn(64, 48, 3, |x, y, px| {
            px.copy_from_slice(&[
                (x * 5 % 256) as u8,
                (y * 7 % 256) as u8,
                ((x * y) % 256) as u8,
            ])
        })
        .unwrap();
        for roi in [
            Roi::new(10.3, 5.7, 37.0, 22.4).unwrap(),
            Roi::new(60.0, 40.0, 90.0, 60.0).unwrap(),
            Roi::new(32.0, 24.0, 16.0, 12.0).unwrap(),
        ] {
            let two_step = resize_patch(&crop_patch(&img, &roi).unwrap(), 32, 20).unwrap();
            assert_eq!(sample_patch(&img, &roi, 32, 20).unwrap(), two_step);
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let img = ramp(50, 50);
        let roi = Roi::new(21.5, 30.2, 33.0, 17.0).unwrap();
        let a = sample_patch(&img, &roi, 24, 12).unwrap();
        let b = sample_patch(&img, &roi, 24, 12).unwrap();
        assert_eq!(a, b);
    }
}
