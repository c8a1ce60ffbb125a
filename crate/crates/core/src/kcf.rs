//! A single kernelized correlation filter.
//!
//! Training solves kernel ridge regression over every cyclic shift of the
//! template in the Fourier domain, `α̂ = ŷ / (k̂ˣˣ + λ)`, where `kˣˣ` is the
//! Gaussian kernel between the template and all of its shifts. Detection
//! evaluates `r = F⁻¹(k̂ˣᶻ ⊙ α̂)` and reads the translation off the peak.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::features::{FeatureMap, FilterFeatureSpec};
use crate::par;
use crate::spectral::{dft2, dft2_pair, idft2, ComplexPlane, RealPlane};

const DENOM_GUARD: f64 = 1e-12;

/// Value returned by [`psr`] when the sidelobe is flat.
pub const PSR_CAP: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterParams {
    /// Gaussian kernel bandwidth.
    pub kernel_bandwidth: f64,
    /// Ridge regularizer.
    pub lambda: f64,
    /// Interpolation rate of the model update.
    pub learning_rate: f64,
    /// Context around the target: the ROI is `(1 + padding)` times the box.
    pub padding: f64,
    pub feature_spec: FilterFeatureSpec,
    /// Label bandwidth relative to `√(W·H)` of the cell grid.
    pub label_sigma_factor: f64,
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::param(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(Error::param(format!(
                "learning rate must lie in [0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.kernel_bandwidth > 0.0) {
            return Err(Error::param(format!(
                "kernel bandwidth must be > 0, got {}",
                self.kernel_bandwidth
            )));
        }
        if !(self.padding >= 0.0) {
            return Err(Error::param(format!(
                "padding must be >= 0, got {}",
                self.padding
            )));
        }
        if !(self.label_sigma_factor > 0.0) {
            return Err(Error::param(format!(
                "label sigma factor must be > 0, got {}",
                self.label_sigma_factor
            )));
        }
        Ok(())
    }
}

/// Learned state of one filter.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterModel {
    alpha_spectrum: ComplexPlane,
    template: FeatureMap,
    // Per-channel spectra of `template`; kept in step with it by linearity.
    template_spectra: Vec<ComplexPlane>,
    label_spectrum: ComplexPlane,
    params: FilterParams,
}

impl FilterModel {
    pub fn alpha_spectrum(&self) -> &ComplexPlane {
        &self.alpha_spectrum
    }

    pub fn template(&self) -> &FeatureMap {
        &self.template
    }

    pub fn label_spectrum(&self) -> &ComplexPlane {
        &self.label_spectrum
    }

    pub fn params(&self) -> &FilterParams {
        &self.params
    }

    pub fn dims(&self) -> (usize, usize) {
        self.template.dims()
    }
}

/// Correlation response over all cyclic shifts, with its peak.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseMap {
    values: RealPlane,
    peak_pos: (usize, usize),
    peak_value: f64,
}

impl ResponseMap {
    /// Wraps a response plane; the peak is the maximum, earliest row-major
    /// index on ties.
    pub fn new(values: RealPlane) -> Self {
        let (mut best, mut at) = (f64::NEG_INFINITY, 0);
        for (i, &v) in values.values().iter().enumerate() {
            if v > best {
                best = v;
                at = i;
            }
        }
        let w = values.width();
        ResponseMap {
            peak_pos: (at % w, at / w),
            peak_value: best,
            values,
        }
    }

    pub fn values(&self) -> &RealPlane {
        &self.values
    }

    pub fn peak_pos(&self) -> (usize, usize) {
        self.peak_pos
    }

    pub fn peak_value(&self) -> f64 {
        self.peak_value
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    /// Peak position as a signed shift in cells: indices past the middle
    /// wrap to negative displacements.
    pub fn displacement(&self) -> (isize, isize) {
        let (w, h) = self.dims();
        (
            wrap_shift(self.peak_pos.0, w),
            wrap_shift(self.peak_pos.1, h),
        )
    }
}

impl ResponseMap {
    /// [`ResponseMap::displacement`] refined per axis by a parabola through
    /// the peak and its two cyclic neighbors; the correction lies within
    /// half a cell.
    pub fn subcell_displacement(&self) -> (f64, f64) {
        let (w, h) = self.dims();
        let (px, py) = self.peak_pos;
        let (dx, dy) = self.displacement();
        let v = |x: usize, y: usize| self.values.get(x, y);
        let c = self.peak_value;
        let ox = parabolic_offset(v((px + w - 1) % w, py), c, v((px + 1) % w, py));
        let oy = parabolic_offset(v(px, (py + h - 1) % h), c, v(px, (py + 1) % h));
        (dx as f64 + ox, dy as f64 + oy)
    }
}

#[inline]
fn parabolic_offset(left: f64, center: f64, right: f64) -> f64 {
    let curvature = left - 2.0 * center + right;
    if curvature < 0.0 {
        (0.5 * (left - right) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn wrap_shift(i: usize, n: usize) -> isize {
    if i > n / 2 {
        i as isize - n as isize
    } else {
        i as isize
    }
}

#[inline]
fn cyclic_distance(i: usize, n: usize) -> usize {
    i.min(n - i)
}

/// Gaussian regression target peaking at `(0, 0)` with wrap-around,
/// bandwidth `σ = sigma_factor·√(W·H)` cells.
pub fn gaussian_label(width: usize, height: usize, sigma_factor: f64) -> Result<RealPlane> {
    if !(sigma_factor > 0.0) {
        return Err(Error::param(format!(
            "label sigma factor must be > 0, got {}",
            sigma_factor
        )));
    }
    let sigma = sigma_factor * ((width * height) as f64).sqrt();
    let k = -0.5 / (sigma * sigma);
    RealPlane::from_fn(width, height, |x, y| {
        let dx = cyclic_distance(x, width) as f64;
        let dy = cyclic_distance(y, height) as f64;
        (k * (dx * dx + dy * dy)).exp()
    })
}

fn channel_spectra(x: &FeatureMap) -> Vec<ComplexPlane> {
    let planes = x.planes();
    let pairs = par::map_range(planes.len().div_ceil(2), |i| match planes.get(2 * i + 1) {
        Some(b) => {
            let (fa, fb) = dft2_pair(&planes[2 * i], b).expect("feature planes share one size");
            vec![fa, fb]
        }
        None => vec![dft2(&planes[2 * i])],
    });
    pairs.into_iter().flatten().collect()
}

/// Kernel row from precomputed channel spectra and squared norms.
fn kernel_from_spectra(
    xs: &[ComplexPlane],
    x_norm: f64,
    zs: &[ComplexPlane],
    z_norm: f64,
    bandwidth: f64,
) -> Result<RealPlane> {
    let (w, h) = xs[0].dims();
    let mut cross = ComplexPlane::zeros(w, h)?;
    for (a, b) in xs.iter().zip(zs) {
        cross.add_conj_product(a, b)?;
    }
    let mut k = idft2(&cross);
    let inv_bw2 = 1.0 / (bandwidth * bandwidth);
    k.values_mut().iter_mut().for_each(|c| {
        let d = (x_norm + z_norm - 2.0 * *c).max(0.0);
        *c = (-d * inv_bw2).exp();
    });
    Ok(k)
}

/// First row of the Gaussian Gram matrix between `x` and all cyclic shifts
/// of `z`: `exp(−max(0, ‖x‖² + ‖z‖² − 2·F⁻¹(Σ_c x̂_c* ⊙ ẑ_c)) / bandwidth²)`.
pub fn gaussian_correlation(x: &FeatureMap, z: &FeatureMap, bandwidth: f64) -> Result<RealPlane> {
    x.check_same_shape(z)?;
    if !(bandwidth > 0.0) {
        return Err(Error::param("kernel bandwidth must be > 0"));
    }
    let xs = channel_spectra(x);
    let zs = channel_spectra(z);
    kernel_from_spectra(&xs, x.sum_squares(), &zs, z.sum_squares(), bandwidth)
}

/// `ŷ ⊘ (k̂ˣˣ + λ)` for a sample with precomputed spectra.
fn dual_spectrum(
    spectra: &[ComplexPlane],
    norm: f64,
    label_spectrum: &ComplexPlane,
    params: &FilterParams,
) -> Result<ComplexPlane> {
    let k = kernel_from_spectra(spectra, norm, spectra, norm, params.kernel_bandwidth)?;
    let kf = dft2(&k);
    let (w, h) = kf.dims();
    let values = kf
        .values()
        .iter()
        .zip(label_spectrum.values())
        .map(|(kv, yv)| yv / guard(kv + params.lambda))
        .collect();
    ComplexPlane::new(w, h, values)
}

#[inline]
fn guard(d: Complex64) -> Complex64 {
    if d.norm() < DENOM_GUARD {
        Complex64::new(DENOM_GUARD, 0.0)
    } else {
        d
    }
}

/// Trains a filter on the feature map `x`.
pub fn train(x: &FeatureMap, params: &FilterParams) -> Result<FilterModel> {
    params.validate()?;
    let (w, h) = x.dims();
    let label_spectrum = dft2(&gaussian_label(w, h, params.label_sigma_factor)?);
    train_with_label(x, label_spectrum, params)
}

/// Trains against an explicit label spectrum instead of the Gaussian label.
pub fn train_with_label(
    x: &FeatureMap,
    label_spectrum: ComplexPlane,
    params: &FilterParams,
) -> Result<FilterModel> {
    params.validate()?;
    if label_spectrum.dims() != x.dims() {
        return Err(Error::dim("label and template sizes differ"));
    }
    let template_spectra = channel_spectra(x);
    let alpha_spectrum =
        dual_spectrum(&template_spectra, x.sum_squares(), &label_spectrum, params)?;
    Ok(FilterModel {
        alpha_spectrum,
        template: x.clone(),
        template_spectra,
        label_spectrum,
        params: *params,
    })
}

/// Linear single-channel filter `ŵ = x̂* ⊙ ŷ ⊘ (x̂* ⊙ x̂ + λ)`. Diagnostic
/// only; the tracker uses the kernelized dual form.
pub fn train_linear(x: &FeatureMap, params: &FilterParams) -> Result<ComplexPlane> {
    if x.channels() != 1 {
        return Err(Error::dim(format!(
            "linear filter takes one channel, got {}",
            x.channels()
        )));
    }
    let (w, h) = x.dims();
    let xf = dft2(x.plane(0));
    let yf = dft2(&gaussian_label(w, h, params.label_sigma_factor)?);
    let values = xf
        .values()
        .iter()
        .zip(yf.values())
        .map(|(xv, yv)| xv.conj() * yv / guard(xv.conj() * xv + params.lambda))
        .collect();
    ComplexPlane::new(w, h, values)
}

/// Correlates the model with a new sample `z`.
pub fn detect(model: &FilterModel, z: &FeatureMap) -> Result<ResponseMap> {
    model.template.check_same_shape(z)?;
    let zs = channel_spectra(z);
    let k = kernel_from_spectra(
        &model.template_spectra,
        model.template.sum_squares(),
        &zs,
        z.sum_squares(),
        model.params.kernel_bandwidth,
    )?;
    let response = idft2(&dft2(&k).mul(&model.alpha_spectrum)?);
    Ok(ResponseMap::new(response))
}

/// Blends a filter trained on `x_new` into the model at the model's
/// learning rate, for both the dual spectrum and the template.
pub fn update(model: &mut FilterModel, x_new: &FeatureMap) -> Result<()> {
    model.template.check_same_shape(x_new)?;
    let rate = model.params.learning_rate;
    let spectra = channel_spectra(x_new);
    let fresh = dual_spectrum(
        &spectra,
        x_new.sum_squares(),
        &model.label_spectrum,
        &model.params,
    )?;
    model.alpha_spectrum.lerp_assign(&fresh, rate)?;
    model.template.lerp_assign(x_new, rate)?;
    for (old, new) in model.template_spectra.iter_mut().zip(&spectra) {
        old.lerp_assign(new, rate)?;
    }
    Ok(())
}

/// Peak-to-sidelobe ratio. The sidelobe is every cell outside the
/// `exclusion × exclusion` window centered (cyclically) on the peak.
pub fn psr(response: &ResponseMap, exclusion: usize) -> Result<f64> {
    if exclusion == 0 || exclusion.is_multiple_of(2) {
        return Err(Error::param(format!(
            "PSR exclusion window must be odd and >= 1, got {}",
            exclusion
        )));
    }
    let (w, h) = response.dims();
    let half = exclusion / 2;
    let (px, py) = response.peak_pos();
    let vals = response.values();
    let mut side = Vec::with_capacity(w * h);
    for y in 0..h {
        let dy = cyclic_distance((y + h - py) % h, h);
        for x in 0..w {
            let dx = cyclic_distance((x + w - px) % w, w);
            if dx > half || dy > half {
                side.push(vals.get(x, y));
            }
        }
    }
    if side.is_empty() {
        return Err(Error::dim(format!(
            "{}x{} exclusion window covers the whole {}x{} response",
            exclusion, exclusion, w, h
        )));
    }
    let n = side.len() as f64;
    let mean = side.iter().sum::<f64>() / n;
    let std = (side.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std < 1e-12 {
        return Ok(PSR_CAP);
    }
    Ok((response.peak_value() - mean) / std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn params(lambda: f64, rate: f64) -> FilterParams {
        FilterParams {
            kernel_bandwidth: 0.5,
            lambda,
            learning_rate: rate,
            padding: 1.5,
            feature_spec: FilterFeatureSpec {
                kind: FeatureKind::Fhog,
                windowed: true,
            },
            label_sigma_factor: 0.1,
        }
    }

    fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> FeatureMap {
        FeatureMap::new(
            (0..c)
                .map(|_| RealPlane::from_fn(w, h, |_, _| rng.random_range(0.0..0.3)).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn label_peak_and_symmetry() {
        let y = gaussian_label(16, 16, 0.1).unwrap();
        assert_eq!(y.get(0, 0), 1.0);
        assert_eq!(y.get(1, 0), y.get(15, 0));
        assert_eq!(y.get(0, 3), y.get(0, 13));
        let sigma: f64 = 1.6;
        let want = (-(2.0_f64 * 2.0) / (2.0 * sigma * sigma)).exp();
        assert!((y.get(2, 0) - want).abs() < 1e-15);
    }

    #[test]
    fn kernel_of_zero_maps_is_one() {
        let z = FeatureMap::new(vec![RealPlane::zeros(6, 5).unwrap()]).unwrap();
        let k = gaussian_correlation(&z, &z, 0.7).unwrap();
        assert!(k.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn kernel_of_impulse() {
        let mut p = RealPlane::zeros(8, 8).unwrap();
        p.set(0, 0, 1.0);
        let x = FeatureMap::new(vec![p]).unwrap();
        let k = gaussian_correlation(&x, &x, 1.0).unwrap();
        for y in 0..8 {
            for xx in 0..8 {
                let want = if (xx, y) == (0, 0) {
                    1.0
                } else {
                    (-2.0f64).exp()
                };
                assert!((k.get(xx, y) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_shape_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_map(&mut rng, 8, 8, 2);
        let b = random_map(&mut rng, 8, 8, 3);
        let c = random_map(&mut rng, 8, 7, 2);
        assert!(gaussian_correlation(&a, &b, 1.0).is_err());
        assert!(gaussian_correlation(&a, &c, 1.0).is_err());
    }

    #[test]
    fn huge_lambda_scales_the_label() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_map(&mut rng, 8, 8, 1);
        let lambda = 1e9;
        let m = train(&x, &params(lambda, 0.02)).unwrap();
        for (a, y) in m
            .alpha_spectrum()
            .values()
            .iter()
            .zip(m.label_spectrum().values())
        {
            let want = y / lambda;
            assert!((a - want).norm() <= 1e-6 * want.norm() + 1e-20);
        }
    }

    #[test]
    fn zero_label_gives_zero_dual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_map(&mut rng, 8, 8, 2);
        let m =
            train_with_label(&x, ComplexPlane::zeros(8, 8).unwrap(), &params(1e-4, 0.02)).unwrap();
        assert!(m.alpha_spectrum().values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn linear_filter_of_impulse_is_the_label() {
        let mut p = RealPlane::zeros(8, 8).unwrap();
        p.set(0, 0, 1.0);
        let x = FeatureMap::new(vec![p]).unwrap();
        let w = train_linear(&x, &params(1e-12, 0.02)).unwrap();
        let y = dft2(&gaussian_label(8, 8, 0.1).unwrap());
        assert!(w.max_abs_diff(&y) < 1e-9);
    }

    #[test]
    fn linear_filter_matches_per_bin_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_map(&mut rng, 8, 8, 1);
        let p = params(0.1, 0.02);
        let w = train_linear(&x, &p).unwrap();
        // Per frequency bin the primal problem is scalar ridge regression:
        // minimise |y - x·w|² + λ|w|² → w = x̄y / (|x|² + λ).
        let xf = dft2(x.plane(0));
        let yf = dft2(&gaussian_label(8, 8, 0.1).unwrap());
        for i in 0..64 {
            let (xv, yv) = (xf.values()[i], yf.values()[i]);
            let want = xv.conj() * yv / (xv.norm_sqr() + 0.1);
            assert!((w.values()[i] - want).norm() < 1e-12);
        }
        let zero = FeatureMap::new(vec![RealPlane::zeros(8, 8).unwrap()]).unwrap();
        let mut p0 = p;
        p0.label_sigma_factor = 0.1;
        let w0 = train_linear(&zero, &p0).unwrap();
        assert!(w0.values().iter().all(|v| v.norm() == 0.0));
        let multi = random_map(&mut rng, 8, 8, 2);
        assert!(train_linear(&multi, &p).is_err());
    }

    #[test]
    fn self_detection_peaks_at_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_map(&mut rng, 16, 12, 3);
        let m = train(&x, &params(1e-4, 0.02)).unwrap();
        let r = detect(&m, &x).unwrap();
        assert_eq!(r.peak_pos(), (0, 0));
        assert_eq!(r.displacement(), (0, 0));
    }

    #[test]
    fn shifted_sample_is_located() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_map(&mut rng, 16, 16, 2);
        let m = train(&x, &params(1e-4, 0.02)).unwrap();
        let z = FeatureMap::new(x.planes().iter().map(|p| p.cyclic_shift(3, 2)).collect()).unwrap();
        assert_eq!(detect(&m, &z).unwrap().displacement(), (3, 2));
        let z =
            FeatureMap::new(x.planes().iter().map(|p| p.cyclic_shift(-5, 4)).collect()).unwrap();
        assert_eq!(detect(&m, &z).unwrap().displacement(), (-5, 4));
    }

    #[test]
    fn zero_sample_gives_finite_response() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_map(&mut rng, 8, 8, 2);
        let m = train(&x, &params(1e-4, 0.02)).unwrap();
        let z = FeatureMap::new(vec![RealPlane::zeros(8, 8).unwrap(); 2]).unwrap();
        let r = detect(&m, &z).unwrap();
        assert!(r.values().values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn update_endpoints_and_interpolation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x0 = random_map(&mut rng, 8, 8, 2);
        let x1 = random_map(&mut rng, 8, 8, 2);

        let frozen = train(&x0, &params(1e-4, 0.0)).unwrap();
        let mut m = frozen.clone();
        update(&mut m, &x1).unwrap();
        assert_eq!(m, frozen);

        let mut m = train(&x0, &params(1e-4, 1.0)).unwrap();
        update(&mut m, &x1).unwrap();
        assert_eq!(m, train(&x1, &params(1e-4, 1.0)).unwrap());

        let beta = 0.02;
        let old = train(&x0, &params(1e-4, beta)).unwrap();
        let fresh = train(&x1, &params(1e-4, beta)).unwrap();
        let mut m = old.clone();
        update(&mut m, &x1).unwrap();
        for i in 0..64 {
            let want = old.alpha_spectrum().values()[i] * (1.0 - beta)
                + fresh.alpha_spectrum().values()[i] * beta;
            assert_eq!(m.alpha_spectrum().values()[i], want);
        }
        for c in 0..2 {
            for i in 0..64 {
                let want = x0.plane(c).values()[i] * (1.0 - beta) + x1.plane(c).values()[i] * beta;
                assert_eq!(m.template().plane(c).values()[i], want);
            }
        }
    }

    #[test]
    fn update_rejects_wrong_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = train(&random_map(&mut rng, 8, 8, 2), &params(1e-4, 0.1)).unwrap();
        assert!(update(&mut m, &random_map(&mut rng, 8, 8, 1)).is_err());
        assert!(detect(&m, &random_map(&mut rng, 9, 8, 2)).is_err());
    }

    #[test]
    fn subcell_refinement() {
        // Samples of a parabola with vertex at x = 2.25 on a wrapped axis.
        let p = RealPlane::from_fn(8, 1, |x, _| 10.0 - (x as f64 - 2.25).powi(2)).unwrap();
        let r = ResponseMap::new(p);
        let (dx, dy) = r.subcell_displacement();
        assert!((dx - 2.25).abs() < 1e-12);
        assert_eq!(dy, 0.0);
        // Peak past the middle wraps to a negative shift.
        let p = RealPlane::from_fn(8, 1, |x, _| {
            if x == 6 {
                1.0
            } else if x == 7 {
                0.5
            } else {
                0.0
            }
        })
        .unwrap();
        let (dx, _) = ResponseMap::new(p).subcell_displacement();
        assert!(dx > -2.0 && dx < -1.5);
    }

    #[test]
    fn psr_degenerate_cases_hit_the_cap() {
        let flat = ResponseMap::new(RealPlane::from_fn(20, 20, |_, _| 0.3).unwrap());
        assert_eq!(psr(&flat, 11).unwrap(), PSR_CAP);

        let mut p = RealPlane::zeros(64, 64).unwrap();
        p.set(30, 12, 10.0);
        assert_eq!(psr(&ResponseMap::new(p), 11).unwrap(), PSR_CAP);
    }

    #[test]
    fn psr_hand_built_map() {
        // Peak 10; with a 1-cell exclusion the sidelobe is five 0s and five
        // 2s: mean 1, population std 1, so PSR = (10 - 1) / 1.
        let p = RealPlane::new(
            11,
            1,
            vec![10.0, 0.0, 2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 2.0],
        )
        .unwrap();
        assert!((psr(&ResponseMap::new(p), 1).unwrap() - 9.0).abs() < 1e-12);

        // Same construction in 2-D with a wrap-around window: peak at the
        // corner excludes rows/cols {7, 0, 1} of an 8x8 map.
        let mut q =
            RealPlane::from_fn(8, 8, |x, y| if (x + y) % 2 == 0 { 0.0 } else { 2.0 }).unwrap();
        q.set(0, 0, 10.0);
        q.set(4, 4, 1.0);
        let near = |a: usize| a == 7 || a <= 1;
        let side: Vec<f64> = (0..64)
            .filter(|i| !(near(i % 8) && near(i / 8)))
            .map(|i| q.values()[i])
            .collect();
        assert_eq!(side.len(), 55);
        let mean = side.iter().sum::<f64>() / 55.0;
        let std = (side.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 55.0).sqrt();
        let got = psr(&ResponseMap::new(q), 3).unwrap();
        assert!((got - (10.0 - mean) / std).abs() < 1e-12);
    }

    #[test]
    fn psr_rejects_bad_windows() {
        let r = ResponseMap::new(RealPlane::zeros(8, 8).unwrap());
        assert!(psr(&r, 4).is_err());
        assert!(psr(&r, 0).is_err());
        assert!(psr(&r, 9).is_err());
    }

    #[test]
    fn peak_ties_break_to_first_index() {
        let mut p = RealPlane::zeros(4, 4).unwrap();
        p.set(3, 1, 5.0);
        p.set(1, 2, 5.0);
        assert_eq!(ResponseMap::new(p).peak_pos(), (3, 1));
    }

    #[test]
    fn params_validation() {
        let mut p = params(1e-4, 0.5);
        assert!(p.validate().is_ok());
        p.lambda = 0.0;
        assert!(p.validate().is_err());
        let mut p = params(1e-4, 1.5);
        assert!(p.validate().is_err());
        p.learning_rate = 0.5;
        p.kernel_bandwidth = -1.0;
        assert!(p.validate().is_err());
    }
}
