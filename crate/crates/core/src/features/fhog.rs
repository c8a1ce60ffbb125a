//! Felzenszwalb HOG: 18 contrast-sensitive orientation channels, 9
//! contrast-insensitive channels and 4 gradient-energy channels per cell.
//!
//! Gradient orientation is snapped to the nearest of 18 directions and the
//! magnitude is spread over the four nearest cells bilinearly. Each cell is
//! normalised against the four 2×2 blocks that contain it (cell indices
//! clamped at the grid border), and every normalised value is truncated at
//! 0.2.

use std::sync::OnceLock;

use super::{FeatureMap, Image};
use crate::error::{Error, Result};
use crate::spectral::RealPlane;

pub const FHOG_CHANNELS: usize = 31;

const BINS: usize = 18;
const HALF: usize = 9;
const TRUNC: f64 = 0.2;
const EPS: f64 = 1e-4;
// Scale for the gradient-energy channels: 1/sqrt(18).
const ENERGY_SCALE: f64 = 0.2357;

fn directions() -> [(f64, f64); HALF] {
    let mut d = [(0.0, 0.0); HALF];
    for (o, v) in d.iter_mut().enumerate() {
        let a = o as f64 * std::f64::consts::PI / HALF as f64;
        *v = (a.cos(), a.sin());
    }
    d
}

fn orientation_bin(dx: f64, dy: f64, dirs: &[(f64, f64); HALF]) -> u8 {
    let mut best_dot = 0.0;
    let mut bin = 0;
    for (o, &(ux, uy)) in dirs.iter().enumerate() {
        let dot = ux * dx + uy * dy;
        if dot > best_dot {
            best_dot = dot;
            bin = o;
        } else if -dot > best_dot {
            best_dot = -dot;
            bin = o + HALF;
        }
    }
    bin as u8
}

/// Contrast-sensitive bin for every integer gradient in `[-255, 255]²`,
/// indexed by `(dy + 255) * 511 + dx + 255`.
fn orientation_bins() -> &'static [u8] {
    static BINS_LUT: OnceLock<Vec<u8>> = OnceLock::new();
    BINS_LUT.get_or_init(|| {
        let dirs = directions();
        (-255..=255)
            .flat_map(|dy| (-255..=255).map(move |dx| (dx, dy)))
            .map(|(dx, dy)| orientation_bin(dx as f64, dy as f64, &dirs))
            .collect()
    })
}

/// Per-axis bilinear spreading: for each pixel, the lower cell index and
/// the weights of it and the next cell.
fn spread_axis(pixels: usize, cell: usize) -> Vec<(isize, f64, f64)> {
    let inv = 1.0 / cell as f64;
    (0..pixels)
        .map(|i| {
            let p = (i as f64 + 0.5) * inv - 0.5;
            let lo = p.floor();
            let w1 = p - lo;
            (lo as isize, 1.0 - w1, w1)
        })
        .collect()
}

/// Per-cell orientation histograms, `BINS` values per cell. The gradient at
/// each pixel is taken from the channel with the largest magnitude, using
/// central differences with replicated borders.
fn cell_histograms(img: &Image, cell: usize, cw: usize, ch: usize) -> Vec<f64> {
    let bins = orientation_bins();
    let mut hist = vec![0.0; cw * ch * BINS];
    let (w, h) = img.dims();
    let nc = img.channels();
    let data = img.data();
    let stride = w * nc;
    let xs = spread_axis(cw * cell, cell);
    let ys = spread_axis(ch * cell, cell);
    for (y, &(iy, vy0, vy1)) in ys.iter().enumerate() {
        let up = &data[y.saturating_sub(1) * stride..][..stride];
        let mid = &data[y * stride..][..stride];
        let down = &data[(y + 1).min(h - 1) * stride..][..stride];
        for (x, &(ix, vx0, vx1)) in xs.iter().enumerate() {
            let (xl, xr) = (x.saturating_sub(1) * nc, (x + 1).min(w - 1) * nc);
            let xc = x * nc;
            let (mut gx, mut gy, mut best) = (0i32, 0i32, -1i32);
            for c in 0..nc {
                let dx = mid[xr + c] as i32 - mid[xl + c] as i32;
                let dy = down[xc + c] as i32 - up[xc + c] as i32;
                let m = dx * dx + dy * dy;
                if m > best {
                    (gx, gy, best) = (dx, dy, m);
                }
            }
            if best == 0 {
                continue;
            }
            let mag = (best as f64).sqrt();
            let bin = bins[((gy + 255) * 511 + gx + 255) as usize] as usize;
            for (cy, wy) in [(iy, vy0), (iy + 1, vy1)] {
                if cy < 0 || cy >= ch as isize {
                    continue;
                }
                let row = cy as usize * cw;
                for (cx, wx) in [(ix, vx0), (ix + 1, vx1)] {
                    if cx < 0 || cx >= cw as isize {
                        continue;
                    }
                    hist[(row + cx as usize) * BINS + bin] += wx * wy * mag;
                }
            }
        }
    }
    hist
}

/// 31-channel fHoG on a `⌊w/cell⌋ × ⌊h/cell⌋` grid.
pub fn extract_fhog(patch: &Image, cell: usize) -> Result<FeatureMap> {
    if cell == 0 {
        return Err(Error::param("cell size must be positive"));
    }
    let (w, h) = patch.dims();
    if w < 2 * cell || h < 2 * cell {
        return Err(Error::dim(format!(
            "{}x{} patch too small for fHoG with {} px cells",
            w, h, cell
        )));
    }
    let (cw, ch) = (w / cell, h / cell);
    let hist = cell_histograms(patch, cell, cw, ch);

    let energy: Vec<f64> = hist
        .chunks_exact(BINS)
        .map(|hc| {
            (0..HALF)
                .map(|o| {
                    let s = hc[o] + hc[o + HALF];
                    s * s
                })
                .sum()
        })
        .collect();
    let e = |x: isize, y: isize| -> f64 {
        let xc = x.clamp(0, cw as isize - 1) as usize;
        let yc = y.clamp(0, ch as isize - 1) as usize;
        energy[yc * cw + xc]
    };
    let block = |x: isize, y: isize| e(x, y) + e(x + 1, y) + e(x, y + 1) + e(x + 1, y + 1);

    let mut out = vec![vec![0.0; cw * ch]; FHOG_CHANNELS];
    for y in 0..ch {
        for x in 0..cw {
            let (xi, yi) = (x as isize, y as isize);
            let norms = [
                1.0 / (block(xi, yi) + EPS).sqrt(),
                1.0 / (block(xi, yi - 1) + EPS).sqrt(),
                1.0 / (block(xi - 1, yi) + EPS).sqrt(),
                1.0 / (block(xi - 1, yi - 1) + EPS).sqrt(),
            ];
            let i = y * cw + x;
            let hc = &hist[i * BINS..(i + 1) * BINS];
            let mut texture = [0.0; 4];
            for o in 0..BINS {
                let mut s = 0.0;
                for (k, n) in norms.iter().enumerate() {
                    let v = (hc[o] * n).min(TRUNC);
                    s += v;
                    texture[k] += v;
                }
                out[o][i] = 0.5 * s;
            }
            for o in 0..HALF {
                let raw = hc[o] + hc[o + HALF];
                let s: f64 = norms.iter().map(|n| (raw * n).min(TRUNC)).sum();
                out[BINS + o][i] = 0.5 * s;
            }
            for (k, t) in texture.iter().enumerate() {
                out[BINS + HALF + k][i] = ENERGY_SCALE * t;
            }
        }
    }

    let planes = out
        .into_iter()
        .map(|v| RealPlane::new(cw, ch, v))
        .collect::<Result<Vec<_>>>()?;
    FeatureMap::new(planes)
}
