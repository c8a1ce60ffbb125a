//! Two-dimensional DFTs over real and complex cell grids.
//!
//! Convention: the forward transform is unnormalized and the inverse carries
//! the `1/(W·H)` factor, so `idft2(dft2(p)) == p`. Transform sizes are used
//! as-is; rustfft handles arbitrary lengths.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub mod oracle;

pub use oracle::circulant_oracle_solve;

/// A real scalar grid stored row-major (`values[y * width + x]`).
#[derive(Clone, Debug, PartialEq)]
pub struct RealPlane {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl RealPlane {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if values.len() != width * height {
            return Err(Error::dim(format!(
                "{}x{} plane needs {} values, got {}",
                width,
                height,
                width * height,
                values.len()
            )));
        }
        Ok(RealPlane {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Ok(RealPlane {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }

    pub fn sum_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cyclic shift: `out(x, y) = self(x - dx, y - dy)` with wrap-around.
    pub fn cyclic_shift(&self, dx: isize, dy: isize) -> RealPlane {
        let (w, h) = (self.width as isize, self.height as isize);
        let mut out = vec![0.0; self.values.len()];
        for y in 0..h {
            let sy = (y - dy).rem_euclid(h);
            for x in 0..w {
                let sx = (x - dx).rem_euclid(w);
                out[(y * w + x) as usize] = self.values[(sy * w + sx) as usize];
            }
        }
        RealPlane {
            width: self.width,
            height: self.height,
            values: out,
        }
    }

    /// Element-wise product with a plane of the same size.
    pub fn mul_assign(&mut self, other: &RealPlane) -> Result<()> {
        same_dims(self.dims(), other.dims())?;
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(a, b)| *a *= b);
        Ok(())
    }

    pub fn scale(&mut self, k: f64) {
        self.values.iter_mut().for_each(|v| *v *= k);
    }
}

/// A complex scalar grid, the spectrum of a [`RealPlane`] of the same size.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexPlane {
    width: usize,
    height: usize,
    values: Vec<Complex64>,
}

impl ComplexPlane {
    pub fn new(width: usize, height: usize, values: Vec<Complex64>) -> Result<Self> {
        check_dims(width, height)?;
        if values.len() != width * height {
            return Err(Error::dim(format!(
                "{}x{} plane needs {} values, got {}",
                width,
                height,
                width * height,
                values.len()
            )));
        }
        Ok(ComplexPlane {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(
            width,
            height,
            vec![Complex64::new(0.0, 0.0); width * height],
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.values[y * self.width + x]
    }

    /// `self ← (1 − rate)·self + rate·other`.
    pub fn lerp_assign(&mut self, other: &ComplexPlane, rate: f64) -> Result<()> {
        same_dims(self.dims(), other.dims())?;
        let keep = 1.0 - rate;
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(a, b)| *a = *a * keep + *b * rate);
        Ok(())
    }

    /// `self += conj(a) ⊙ b`, the per-channel cross-power term of a
    /// multi-channel correlation.
    pub fn add_conj_product(&mut self, a: &ComplexPlane, b: &ComplexPlane) -> Result<()> {
        same_dims(self.dims(), a.dims())?;
        same_dims(self.dims(), b.dims())?;
        for ((acc, x), z) in self.values.iter_mut().zip(&a.values).zip(&b.values) {
            *acc += x.conj() * z;
        }
        Ok(())
    }

    pub fn mul(&self, other: &ComplexPlane) -> Result<ComplexPlane> {
        same_dims(self.dims(), other.dims())?;
        Ok(ComplexPlane {
            width: self.width,
            height: self.height,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &ComplexPlane) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::dim(format!("empty {}x{} plane", width, height)));
    }
    Ok(())
}

pub(crate) fn same_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::dim(format!(
            "plane size mismatch: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], width: usize, height: usize) {
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for (x, v) in row.iter().enumerate() {
            dst[x * height + y] = *v;
        }
    }
}

/// In-place 2-D transform of a row-major `width × height` buffer. No
/// normalization is applied in either direction.
pub(crate) fn fft2_in_place(buf: &mut [Complex64], width: usize, height: usize, inverse: bool) {
    debug_assert_eq!(buf.len(), width * height);
    let rows = plan(width, inverse);
    let cols = plan(height, inverse);
    let mut scratch = vec![
        Complex64::new(0.0, 0.0);
        rows.get_inplace_scratch_len()
            .max(cols.get_inplace_scratch_len())
    ];
    rows.process_with_scratch(buf, &mut scratch[..rows.get_inplace_scratch_len()]);
    if height == 1 {
        return;
    }
    let mut t = vec![Complex64::new(0.0, 0.0); buf.len()];
    transpose(buf, &mut t, width, height);
    cols.process_with_scratch(&mut t, &mut scratch[..cols.get_inplace_scratch_len()]);
    transpose(&t, buf, height, width);
}

/// Unnormalized forward 2-D DFT.
pub fn dft2(plane: &RealPlane) -> ComplexPlane {
    let mut buf: Vec<Complex64> = plane
        .values
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft2_in_place(&mut buf, plane.width, plane.height, false);
    ComplexPlane {
        width: plane.width,
        height: plane.height,
        values: buf,
    }
}

/// Forward DFTs of two equally sized real planes from a single complex
/// transform of `a + i·b`, separated through conjugate symmetry.
pub fn dft2_pair(a: &RealPlane, b: &RealPlane) -> Result<(ComplexPlane, ComplexPlane)> {
    same_dims(a.dims(), b.dims())?;
    let (w, h) = a.dims();
    let mut buf: Vec<Complex64> = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect();
    fft2_in_place(&mut buf, w, h, false);
    let mut fa = Vec::with_capacity(buf.len());
    let mut fb = Vec::with_capacity(buf.len());
    for y in 0..h {
        let ny = (h - y) % h;
        for x in 0..w {
            let z = buf[y * w + x];
            let zn = buf[ny * w + (w - x) % w].conj();
            fa.push((z + zn) * 0.5);
            let d = (z - zn) * 0.5;
            fb.push(Complex64::new(d.im, -d.re));
        }
    }
    Ok((
        ComplexPlane {
            width: w,
            height: h,
            values: fa,
        },
        ComplexPlane {
            width: w,
            height: h,
            values: fb,
        },
    ))
}

/// Inverse 2-D DFT with `1/(W·H)` normalization, keeping the real part.
pub fn idft2(plane: &ComplexPlane) -> RealPlane {
    let mut buf = plane.values.clone();
    fft2_in_place(&mut buf, plane.width, plane.height, true);
    let norm = 1.0 / (plane.width * plane.height) as f64;
    RealPlane {
        width: plane.width,
        height: plane.height,
        values: buf.iter().map(|c| c.re * norm).collect(),
    }
}

/// Symmetric 1-D Hann window of length `n`: zero at both ends.
pub fn hann1(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / denom).cos()))
        .collect()
}

/// Separable raised-cosine window, zero on the border ring.
pub fn hann2(width: usize, height: usize) -> Result<RealPlane> {
    if width < 2 || height < 2 {
        return Err(Error::dim(format!(
            "hann window needs at least 2x2 cells, got {}x{}",
            width, height
        )));
    }
    let wx = hann1(width);
    let wy = hann1(height);
    RealPlane::from_fn(width, height, |x, y| wx[x] * wy[y])
}
