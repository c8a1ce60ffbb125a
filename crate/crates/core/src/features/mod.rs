//! Image patches and the per-filter feature stacks built from them.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::spectral::{hann2, RealPlane};

mod color_naming;
mod fhog;
mod patch;

pub use color_naming::{extract_color_naming, ColorNamingTable, COLOR_NAMES, TABLE_ROWS};
pub use fhog::{extract_fhog, FHOG_CHANNELS};
pub use patch::{crop_patch, resize_patch, sample_patch};

/// An 8-bit image, row-major and channel-interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::dim(format!("empty {}x{} image", width, height)));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::dim(format!(
                "images have 1 or 3 channels, got {}",
                channels
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::dim(format!(
                "{}x{}x{} image needs {} bytes, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn rgb(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 3, data)
    }

    /// Builds an image from a per-pixel closure returning `channels` bytes.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, &mut [u8]),
    ) -> Result<Self> {
        let mut data = vec![0u8; width * height * channels];
        for y in 0..height {
            for x in 0..width {
                let i = (y * width + x) * channels;
                f(x, y, &mut data[i..i + channels]);
            }
        }
        Self::new(width, height, channels, data)
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

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn is_color(&self) -> bool {
        self.channels == 3
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }
}

/// A region of interest in pixel coordinates, described by its center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Roi {
    pub center_x: f64,
    pub center_y: f64,
    pub width: f64,
    pub height: f64,
}

impl Roi {
    pub fn new(center_x: f64, center_y: f64, width: f64, height: f64) -> Result<Self> {
        let roi = Roi {
            center_x,
            center_y,
            width,
            height,
        };
        roi.validate()?;
        Ok(roi)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.center_x, self.center_y, self.width, self.height]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.width > 0.0) || !(self.height > 0.0) {
            return Err(Error::dim(format!("degenerate ROI {:?}", self)));
        }
        Ok(())
    }

    /// Integer pixel extent of the patch cut for this ROI.
    pub fn patch_size(&self) -> (usize, usize) {
        (
            (self.width.round() as usize).max(1),
            (self.height.round() as usize).max(1),
        )
    }

    /// Top-left pixel of the cut patch.
    pub fn patch_origin(&self) -> (isize, isize) {
        let (pw, ph) = self.patch_size();
        (
            (self.center_x - pw as f64 / 2.0).floor() as isize,
            (self.center_y - ph as f64 / 2.0).floor() as isize,
        )
    }

    /// Image-space center of the cut patch; differs from the nominal center
    /// by less than a pixel because patches start on whole pixels.
    pub fn patch_center(&self) -> (f64, f64) {
        let (pw, ph) = self.patch_size();
        let (x0, y0) = self.patch_origin();
        (x0 as f64 + pw as f64 / 2.0, y0 as f64 + ph as f64 / 2.0)
    }
}

/// A multi-channel cell grid; every channel has the same size.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    planes: Vec<RealPlane>,
}

impl FeatureMap {
    pub fn new(planes: Vec<RealPlane>) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::dim("feature map needs at least one channel"))?;
        let (width, height) = first.dims();
        if planes.iter().any(|p| p.dims() != (width, height)) {
            return Err(Error::dim("feature channels differ in size"));
        }
        Ok(FeatureMap {
            width,
            height,
            planes,
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

    pub fn channels(&self) -> usize {
        self.planes.len()
    }

    pub fn planes(&self) -> &[RealPlane] {
        &self.planes
    }

    pub fn plane(&self, c: usize) -> &RealPlane {
        &self.planes[c]
    }

    pub fn into_planes(self) -> Vec<RealPlane> {
        self.planes
    }

    /// Number of scalar values, `W·H·C`.
    pub fn numel(&self) -> usize {
        self.width * self.height * self.planes.len()
    }

    pub fn sum_squares(&self) -> f64 {
        self.planes.iter().map(RealPlane::sum_squares).sum()
    }

    pub fn concat(mut self, other: FeatureMap) -> Result<FeatureMap> {
        if self.dims() != other.dims() {
            return Err(Error::dim("cannot stack feature maps of different size"));
        }
        self.planes.extend(other.planes);
        Ok(self)
    }

    pub fn apply_window(&mut self, window: &RealPlane) -> Result<()> {
        for p in &mut self.planes {
            p.mul_assign(window)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, k: f64) {
        self.planes.iter_mut().for_each(|p| p.scale(k));
    }

    pub fn check_same_shape(&self, other: &FeatureMap) -> Result<()> {
        if self.dims() != other.dims() || self.channels() != other.channels() {
            return Err(Error::dim(format!(
                "feature map mismatch: {}x{}x{} vs {}x{}x{}",
                self.width,
                self.height,
                self.channels(),
                other.width,
                other.height,
                other.channels()
            )));
        }
        Ok(())
    }

    /// `self ← (1 − rate)·self + rate·other`.
    pub fn lerp_assign(&mut self, other: &FeatureMap, rate: f64) -> Result<()> {
        self.check_same_shape(other)?;
        let keep = 1.0 - rate;
        for (a, b) in self.planes.iter_mut().zip(&other.planes) {
            a.values_mut()
                .iter_mut()
                .zip(b.values())
                .for_each(|(u, v)| *u = *u * keep + v * rate);
        }
        Ok(())
    }
}

/// Which hand-crafted channels a filter consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureKind {
    /// 31 fHoG channels.
    Fhog,
    /// 31 fHoG channels followed by 11 color-naming channels.
    FhogColor,
}

impl FeatureKind {
    pub fn channels(self) -> usize {
        match self {
            FeatureKind::Fhog => FHOG_CHANNELS,
            FeatureKind::FhogColor => FHOG_CHANNELS + COLOR_NAMES,
        }
    }

    pub fn uses_color(self) -> bool {
        self == FeatureKind::FhogColor
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Fhog => "fhog",
            FeatureKind::FhogColor => "fhog+cn",
        })
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fhog" => Ok(FeatureKind::Fhog),
            "fhog+cn" => Ok(FeatureKind::FhogColor),
            other => Err(Error::param(format!(
                "unknown feature set {:?} (expected fhog or fhog+cn)",
                other
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FilterFeatureSpec {
    pub kind: FeatureKind,
    pub windowed: bool,
}

/// Extracts the channels named by `spec` from `patch` and applies the Hann
/// window when requested.
pub fn build_feature_stack(
    patch: &Image,
    spec: FilterFeatureSpec,
    table: Option<&ColorNamingTable>,
    cell: usize,
) -> Result<FeatureMap> {
    let mut map = extract_fhog(patch, cell)?;
    if spec.kind.uses_color() {
        let table = table.ok_or_else(|| {
            Error::ColorTable("color-naming features requested without a table".into())
        })?;
        map = map.concat(extract_color_naming(patch, table, cell)?)?;
    }
    if spec.windowed {
        let window = hann2(map.width(), map.height())?;
        map.apply_window(&window)?;
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_table() -> ColorNamingTable {
        ColorNamingTable::from_rows(vec![[1.0 / 11.0; COLOR_NAMES]; TABLE_ROWS]).unwrap()
    }

    fn textured(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, 3, |x, y, px| {
            let v = ((x * 37 + y * 91) % 251) as u8;
            px.copy_from_slice(&[v, v.wrapping_mul(3), 255 - v]);
        })
        .unwrap()
    }

    #[test]
    fn image_validation() {
        assert!(Image::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(Image::gray(0, 2, vec![]).is_err());
        assert!(Image::rgb(2, 2, vec![0; 11]).is_err());
        assert!(Image::rgb(2, 2, vec![0; 12]).is_ok());
    }

    #[test]
    fn stack_channel_counts() {
        let img = textured(64, 48);
        let table = uniform_table();
        let hog = FilterFeatureSpec {
            kind: FeatureKind::Fhog,
            windowed: false,
        };
        let both = FilterFeatureSpec {
            kind: FeatureKind::FhogColor,
            windowed: false,
        };
        let a = build_feature_stack(&img, hog, Some(&table), 4).unwrap();
        let b = build_feature_stack(&img, both, Some(&table), 4).unwrap();
        assert_eq!(a.channels(), 31);
        assert_eq!(b.channels(), 42);
        assert_eq!(a.dims(), (16, 12));
        assert_eq!(b.dims(), (16, 12));
    }

    #[test]
    fn windowed_stack_has_zero_border() {
        let img = textured(64, 64);
        let table = uniform_table();
        let spec = FilterFeatureSpec {
            kind: FeatureKind::FhogColor,
            windowed: true,
        };
        let m = build_feature_stack(&img, spec, Some(&table), 4).unwrap();
        let (w, h) = m.dims();
        for p in m.planes() {
            for x in 0..w {
                assert_eq!(p.get(x, 0), 0.0);
                assert_eq!(p.get(x, h - 1), 0.0);
            }
            for y in 0..h {
                assert_eq!(p.get(0, y), 0.0);
                assert_eq!(p.get(w - 1, y), 0.0);
            }
        }
    }

    #[test]
    fn color_on_gray_is_an_error() {
        let img = Image::gray(32, 32, vec![128; 32 * 32]).unwrap();
        let spec = FilterFeatureSpec {
            kind: FeatureKind::FhogColor,
            windowed: false,
        };
        let err = build_feature_stack(&img, spec, Some(&uniform_table()), 4).unwrap_err();
        assert!(matches!(err, Error::GrayscaleColorFeatures));
    }

    #[test]
    fn feature_kind_round_trips_through_text() {
        for k in [FeatureKind::Fhog, FeatureKind::FhogColor] {
            assert_eq!(k.to_string().parse::<FeatureKind>().unwrap(), k);
        }
        assert!("hog".parse::<FeatureKind>().is_err());
    }

    #[test]
    fn feature_map_rejects_ragged_channels() {
        let a = RealPlane::zeros(4, 4).unwrap();
        let b = RealPlane::zeros(4, 3).unwrap();
        assert!(FeatureMap::new(vec![a, b]).is_err());
        assert!(FeatureMap::new(vec![]).is_err());
    }

    #[test]
    fn roi_patch_geometry() {
        let r = Roi::new(50.0, 40.0, 20.0, 10.0).unwrap();
        assert_eq!(r.patch_size(), (20, 10));
        assert_eq!(r.patch_origin(), (40, 35));
        assert_eq!(r.patch_center(), (50.0, 40.0));
        assert!(Roi::new(0.0, 0.0, 0.0, 5.0).is_err());
    }
}
