//! The ensemble tracker: three correlation filters deployed in turn by frame
//! counter, a scale filter searching a small pool of factors, and a particle
//! filter smoothing the target center.
//!
//! Within a cycle of `n` frames, frame `fc` runs the scale filter when
//! `fc % n == 0`, the large-area translation filter when
//! `0 < fc % n <= n / 2` (real division) and the small-area translation
//! filter otherwise. For `n = 5` that is `L, L, S, S, Scale`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{
    build_feature_stack, sample_patch, ColorNamingTable, FeatureKind, FeatureMap,
    FilterFeatureSpec, Image, Roi,
};
use crate::kcf::{self, FilterModel, FilterParams, ResponseMap};
use crate::par;
use crate::particle::ParticleSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FilterKind {
    LargeTranslation,
    SmallTranslation,
    Scale,
}

impl FilterKind {
    pub fn short_name(self) -> &'static str {
        match self {
            FilterKind::LargeTranslation => "L",
            FilterKind::SmallTranslation => "S",
            FilterKind::Scale => "Scale",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Filter scheduled for frame `fc` in a cycle of `n` frames.
pub fn select_filter(fc: u64, n: u64) -> FilterKind {
    let r = fc % n;
    if r == 0 {
        FilterKind::Scale
    } else if r as f64 <= n as f64 / 2.0 {
        FilterKind::LargeTranslation
    } else {
        FilterKind::SmallTranslation
    }
}

/// Target center and size; the current size is the base size times `scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetState {
    pub center_x: f64,
    pub center_y: f64,
    pub base_width: f64,
    pub base_height: f64,
    pub scale: f64,
}

impl TargetState {
    pub fn width(&self) -> f64 {
        self.base_width * self.scale
    }

    pub fn height(&self) -> f64 {
        self.base_height * self.scale
    }

    pub fn roi(&self) -> Roi {
        Roi {
            center_x: self.center_x,
            center_y: self.center_y,
            width: self.width(),
            height: self.height(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchedulerConfig {
    /// Frames per deployment cycle.
    pub n: u64,
    pub scale_pool: Vec<f64>,
    /// PSR the winning scale response must reach before the scale model is
    /// updated.
    pub t_rs: f64,
    pub params_l: FilterParams,
    pub params_s: FilterParams,
    pub params_scale: FilterParams,
    pub pf_enabled: bool,
    /// Low-frame-rate mode: the large-area filter runs every frame, scale
    /// frames add a scale search, and the particle filter is off.
    pub every_frame_l: bool,
    /// Moves the center to the winning scale response's peak on scale frames.
    pub recenter_on_scale: bool,
    /// With the scale filter off, scale slots run the large-area filter and
    /// the scale stays at 1.
    pub scale_enabled: bool,
    pub particles: usize,
    /// Side of the response neighborhood summed into a particle's weight.
    pub pf_window: usize,
    pub pf_noise_pos: f64,
    pub pf_noise_vel: f64,
    pub psr_exclusion: usize,
    pub cell_size: usize,
    /// Long side of the translation templates in pixels.
    pub translation_template: usize,
    /// Long side of the scale template in pixels.
    pub scale_template: usize,
    /// Half-width of uniform noise added to every filter translation. Zero
    /// for normal tracking; used to study the particle filter.
    pub translation_noise_px: f64,
    pub seed: u64,
}

fn default_params(
    kernel_bandwidth: f64,
    learning_rate: f64,
    padding: f64,
    kind: FeatureKind,
    windowed: bool,
) -> FilterParams {
    FilterParams {
        kernel_bandwidth,
        lambda: 1e-4,
        learning_rate,
        padding,
        feature_spec: FilterFeatureSpec { kind, windowed },
        label_sigma_factor: 0.1,
    }
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            n: 5,
            scale_pool: vec![1.05, 1.0, 0.952381],
            t_rs: 4.0,
            params_l: default_params(0.7, 0.020, 2.0, FeatureKind::FhogColor, true),
            params_s: default_params(0.6, 0.020, 1.5, FeatureKind::Fhog, true),
            params_scale: default_params(0.9, 0.010, 0.0, FeatureKind::FhogColor, false),
            pf_enabled: true,
            every_frame_l: false,
            recenter_on_scale: true,
            scale_enabled: true,
            particles: 1000,
            pf_window: 5,
            pf_noise_pos: 3.0,
            pf_noise_vel: 1.0,
            psr_exclusion: 11,
            cell_size: 4,
            translation_template: 128,
            scale_template: 64,
            translation_noise_px: 0.0,
            seed: 42,
        }
    }
}

impl SchedulerConfig {
    /// Low-frame-rate preset: large-area filter every frame, no particle
    /// filter.
    pub fn low_fps(mut self) -> Self {
        self.every_frame_l = true;
        self.pf_enabled = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param(format!("n must be >= 2, got {}", self.n)));
        }
        if self.scale_pool.is_empty() || !self.scale_pool.contains(&1.0) {
            return Err(Error::param("scale pool must be non-empty and contain 1.0"));
        }
        if self.scale_pool.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::param("scale pool entries must be finite and > 0"));
        }
        if !(self.t_rs > 0.0) {
            return Err(Error::param(format!("t_rs must be > 0, got {}", self.t_rs)));
        }
        for p in [&self.params_l, &self.params_s, &self.params_scale] {
            p.validate()?;
        }
        if self.particles == 0 {
            return Err(Error::param("particle count must be > 0"));
        }
        if self.pf_window == 0 || self.pf_window.is_multiple_of(2) {
            return Err(Error::param("pf window must be odd and >= 1"));
        }
        if self.psr_exclusion == 0 || self.psr_exclusion.is_multiple_of(2) {
            return Err(Error::param("psr exclusion must be odd and >= 1"));
        }
        if !(self.pf_noise_pos >= 0.0 && self.pf_noise_vel >= 0.0) {
            return Err(Error::param("particle noise must be >= 0"));
        }
        if !(self.translation_noise_px >= 0.0 && self.translation_noise_px.is_finite()) {
            return Err(Error::param("translation noise must be finite and >= 0"));
        }
        if self.cell_size == 0 {
            return Err(Error::param("cell size must be > 0"));
        }
        for t in [self.translation_template, self.scale_template] {
            if t < 4 * self.cell_size {
                return Err(Error::param(format!(
                    "template side {} below four {} px cells",
                    t, self.cell_size
                )));
            }
        }
        Ok(())
    }

    /// Every field as `(key, value)` text, in a fixed order. Values parse
    /// back to bit-identical numbers through [`SchedulerConfig::set`].
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("n", self.n.to_string());
        put(
            "scale_pool",
            self.scale_pool
                .iter()
                .map(|s| format!("{:?}", s))
                .collect::<Vec<_>>()
                .join(","),
        );
        put("t_rs", format!("{:?}", self.t_rs));
        for (suffix, p) in [
            ("L", &self.params_l),
            ("S", &self.params_s),
            ("scale", &self.params_scale),
        ] {
            put(
                &format!("kernel_bandwidth_{}", suffix),
                format!("{:?}", p.kernel_bandwidth),
            );
            put(&format!("lambda_{}", suffix), format!("{:?}", p.lambda));
            put(
                &format!("learning_rate_{}", suffix),
                format!("{:?}", p.learning_rate),
            );
            put(&format!("padding_{}", suffix), format!("{:?}", p.padding));
            put(
                &format!("features_{}", suffix),
                p.feature_spec.kind.to_string(),
            );
            put(
                &format!("hann_{}", suffix),
                p.feature_spec.windowed.to_string(),
            );
            put(
                &format!("label_sigma_{}", suffix),
                format!("{:?}", p.label_sigma_factor),
            );
        }
        put("pf_enabled", self.pf_enabled.to_string());
        put("every_frame_L", self.every_frame_l.to_string());
        put("recenter_on_scale", self.recenter_on_scale.to_string());
        put("scale_enabled", self.scale_enabled.to_string());
        put("particles", self.particles.to_string());
        put("pf_window", self.pf_window.to_string());
        put("pf_noise_pos", format!("{:?}", self.pf_noise_pos));
        put("pf_noise_vel", format!("{:?}", self.pf_noise_vel));
        put("psr_exclusion", self.psr_exclusion.to_string());
        put("cell_size", self.cell_size.to_string());
        put(
            "translation_template",
            self.translation_template.to_string(),
        );
        put("scale_template", self.scale_template.to_string());
        put(
            "translation_noise_px",
            format!("{:?}", self.translation_noise_px),
        );
        put("seed", self.seed.to_string());
        out
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |what: &str| Error::param(format!("{} = {:?}: expected {}", key, value, what));
        let float = || value.parse::<f64>().map_err(|_| bad("a number"));
        let int = || {
            value
                .parse::<u64>()
                .map_err(|_| bad("a non-negative integer"))
        };
        let flag = || value.parse::<bool>().map_err(|_| bad("true or false"));

        if let Some((field, suffix)) = key.rsplit_once('_') {
            let target = match suffix {
                "L" => Some(&mut self.params_l),
                "S" => Some(&mut self.params_s),
                "scale" if field != "recenter_on" => Some(&mut self.params_scale),
                _ => None,
            };
            if let Some(p) = target {
                match field {
                    "kernel_bandwidth" => p.kernel_bandwidth = float()?,
                    "lambda" => p.lambda = float()?,
                    "learning_rate" => p.learning_rate = float()?,
                    "padding" => p.padding = float()?,
                    "features" => p.feature_spec.kind = value.parse()?,
                    "hann" => p.feature_spec.windowed = flag()?,
                    "label_sigma" => p.label_sigma_factor = float()?,
                    "every_frame" if suffix == "L" => self.every_frame_l = flag()?,
                    _ => return Err(Error::param(format!("unknown config key {:?}", key))),
                }
                return Ok(());
            }
        }
        match key {
            "n" => self.n = int()?,
            "scale_pool" => {
                self.scale_pool = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("a comma-separated list of numbers"))?
            }
            "t_rs" => self.t_rs = float()?,
            "pf_enabled" => self.pf_enabled = flag()?,
            "recenter_on_scale" => self.recenter_on_scale = flag()?,
            "scale_enabled" => self.scale_enabled = flag()?,
            "particles" => self.particles = int()? as usize,
            "pf_window" => self.pf_window = int()? as usize,
            "pf_noise_pos" => self.pf_noise_pos = float()?,
            "pf_noise_vel" => self.pf_noise_vel = float()?,
            "psr_exclusion" => self.psr_exclusion = int()? as usize,
            "cell_size" => self.cell_size = int()? as usize,
            "translation_template" => self.translation_template = int()? as usize,
            "scale_template" => self.scale_template = int()? as usize,
            "translation_noise_px" => self.translation_noise_px = float()?,
            "seed" => self.seed = int()?,
            _ => return Err(Error::param(format!("unknown config key {:?}", key))),
        }
        Ok(())
    }

    /// Short stable fingerprint of the configuration (FNV-1a over the
    /// entries).
    pub fn digest(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (k, v) in self.entries() {
            for b in k.bytes().chain(*b"=").chain(v.bytes()).chain(*b"\n") {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        format!("{:016x}", h)
    }
}

/// Template pixel size for a region of `w × h` pixels: the long side becomes
/// `long`, the short side keeps the aspect ratio rounded to whole cells
/// (at least four).
pub fn template_size(w: f64, h: f64, long: usize, cell: usize) -> (usize, usize) {
    let short_cells = |short: f64, long_side: f64| -> usize {
        let cells = (long as f64 * short / long_side / cell as f64).round() as usize;
        (cells.max(4) * cell).min(long)
    };
    if w >= h {
        (long, short_cells(h, w))
    } else {
        (short_cells(w, h), long)
    }
}

/// What one call to [`Tracker::step`] did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    /// Filters run this frame, in order.
    pub dispatched: Vec<FilterKind>,
    /// Center from the correlation filters before particle smoothing.
    pub filter_center: Option<(f64, f64)>,
    /// PSR of the winning scale on scale frames.
    pub scale_psr: Option<f64>,
    pub scale_factor: Option<f64>,
    pub scale_model_updated: bool,
}

/// Result of the scale search.
#[derive(Clone, Debug)]
pub struct ScaleEstimate {
    pub factor: f64,
    pub psr: f64,
    pub response: ResponseMap,
    /// Region the winning response was computed over.
    pub roi: Roi,
}

#[derive(Clone, Debug)]
struct Slot {
    params: FilterParams,
    template: (usize, usize),
    model: FilterModel,
}

/// Single-target tracker.
#[derive(Clone, Debug)]
pub struct Tracker {
    config: SchedulerConfig,
    table: Option<Arc<ColorNamingTable>>,
    frame_dims: (usize, usize),
    fc: u64,
    state: TargetState,
    large: Slot,
    small: Slot,
    scale: Slot,
    particles: ParticleSet,
    noise_rng: ChaCha8Rng,
    report: StepReport,
}

/// Downgrades color features on grayscale frames and checks that a table
/// is present when color features remain.
fn effective_params(
    params: &FilterParams,
    color: bool,
    table: Option<&ColorNamingTable>,
) -> Result<FilterParams> {
    let mut p = *params;
    if p.feature_spec.kind.uses_color() {
        if !color {
            p.feature_spec.kind = FeatureKind::Fhog;
        } else if table.is_none() {
            return Err(Error::ColorTable(
                "color-naming features configured but no table supplied".into(),
            ));
        }
    }
    Ok(p)
}

/// Feature stack for `roi` resampled to `template`, scaled to unit
/// mean-square energy per element so that kernel bandwidths do not depend
/// on the template size.
fn extract(
    frame: &Image,
    roi: &Roi,
    template: (usize, usize),
    spec: FilterFeatureSpec,
    table: Option<&ColorNamingTable>,
    cell: usize,
) -> Result<FeatureMap> {
    let patch = sample_patch(frame, roi, template.0, template.1)?;
    let mut map = build_feature_stack(&patch, spec, table, cell)?;
    map.scale(1.0 / (map.numel() as f64).sqrt());
    Ok(map)
}

/// Largest usable PSR window for a map: at most `exclusion`, and small
/// enough that some sidelobe remains.
fn fit_exclusion(exclusion: usize, dims: (usize, usize)) -> usize {
    let longest = dims.0.max(dims.1);
    if exclusion < longest {
        return exclusion;
    }
    let e = longest.saturating_sub(1).max(1);
    if e.is_multiple_of(2) {
        e - 1
    } else {
        e
    }
}

impl Tracker {
    /// Trains all three filters on `frame` around `bbox` and places the
    /// particles at its center.
    pub fn new(
        frame: &Image,
        bbox: Roi,
        config: SchedulerConfig,
        table: Option<Arc<ColorNamingTable>>,
    ) -> Result<Self> {
        config.validate()?;
        bbox.validate()?;
        let (fw, fh) = frame.dims();
        let ox = (bbox.center_x + bbox.width / 2.0).min(fw as f64)
            - (bbox.center_x - bbox.width / 2.0).max(0.0);
        let oy = (bbox.center_y + bbox.height / 2.0).min(fh as f64)
            - (bbox.center_y - bbox.height / 2.0).max(0.0);
        if !(ox > 0.0 && oy > 0.0) {
            return Err(Error::dim(format!(
                "box {:?} does not overlap the {}x{} frame",
                bbox, fw, fh
            )));
        }

        let state = TargetState {
            center_x: bbox.center_x,
            center_y: bbox.center_y,
            base_width: bbox.width,
            base_height: bbox.height,
            scale: 1.0,
        };
        let tref = table.as_deref();
        let cell = config.cell_size;
        let make_slot = |params: &FilterParams, long: usize| -> Result<Slot> {
            let params = effective_params(params, frame.is_color(), tref)?;
            let grow = 1.0 + params.padding;
            let template = template_size(bbox.width * grow, bbox.height * grow, long, cell);
            let roi = region(&state, state.center_x, state.center_y, params.padding, 1.0)?;
            let x = extract(frame, &roi, template, params.feature_spec, tref, cell)?;
            let model = kcf::train(&x, &params)?;
            Ok(Slot {
                params,
                template,
                model,
            })
        };
        let large = make_slot(&config.params_l, config.translation_template)?;
        let small = make_slot(&config.params_s, config.translation_template)?;
        let scale = make_slot(&config.params_scale, config.scale_template)?;
        let particles =
            ParticleSet::new(config.particles, bbox.center_x, bbox.center_y, config.seed)?;
        let noise_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6e6f_6973_6520_7078);

        Ok(Tracker {
            frame_dims: frame.dims(),
            fc: 0,
            state,
            large,
            small,
            scale,
            particles,
            noise_rng,
            report: StepReport::default(),
            config,
            table,
        })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn state(&self) -> &TargetState {
        &self.state
    }

    /// Frames tracked since initialization.
    pub fn frame_count(&self) -> u64 {
        self.fc
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.particles
    }

    pub fn last_report(&self) -> &StepReport {
        &self.report
    }

    pub fn model(&self, kind: FilterKind) -> &FilterModel {
        &self.slot(kind).model
    }

    /// Template pixel size of a filter.
    pub fn template(&self, kind: FilterKind) -> (usize, usize) {
        self.slot(kind).template
    }

    /// Effective parameters of a filter after grayscale downgrade.
    pub fn params(&self, kind: FilterKind) -> &FilterParams {
        &self.slot(kind).params
    }

    fn slot(&self, kind: FilterKind) -> &Slot {
        match kind {
            FilterKind::LargeTranslation => &self.large,
            FilterKind::SmallTranslation => &self.small,
            FilterKind::Scale => &self.scale,
        }
    }

    fn slot_mut(&mut self, kind: FilterKind) -> &mut Slot {
        match kind {
            FilterKind::LargeTranslation => &mut self.large,
            FilterKind::SmallTranslation => &mut self.small,
            FilterKind::Scale => &mut self.scale,
        }
    }

    fn pf_active(&self) -> bool {
        self.config.pf_enabled && !self.config.every_frame_l
    }

    fn features(&self, frame: &Image, kind: FilterKind, roi: &Roi) -> Result<FeatureMap> {
        let slot = self.slot(kind);
        extract(
            frame,
            roi,
            slot.template,
            slot.params.feature_spec,
            self.table.as_deref(),
            self.config.cell_size,
        )
    }

    fn draw_noise(&mut self) -> (f64, f64) {
        let a = self.config.translation_noise_px;
        if a > 0.0 {
            (
                self.noise_rng.random_range(-a..=a),
                self.noise_rng.random_range(-a..=a),
            )
        } else {
            (0.0, 0.0)
        }
    }

    /// Converts a response peak over `roi` into an image-space center, with
    /// translation noise applied, and the reference region for particle
    /// weighting, which the noise does not touch.
    fn locate(
        &mut self,
        response: &ResponseMap,
        roi: &Roi,
        template: (usize, usize),
    ) -> ((f64, f64), Roi) {
        let (dx, dy) = response.displacement();
        let (pw, ph) = roi.patch_size();
        let (pcx, pcy) = roi.patch_center();
        let cell = self.config.cell_size as f64;
        let sx = cell * pw as f64 / template.0 as f64;
        let sy = cell * ph as f64 / template.1 as f64;
        let (nx, ny) = self.draw_noise();
        let center = (pcx + dx as f64 * sx + nx, pcy + dy as f64 * sy + ny);
        let reference = Roi {
            center_x: pcx,
            center_y: pcy,
            width: pw as f64,
            height: ph as f64,
        };
        (center, reference)
    }

    /// Searches the scale pool around `center` at the current scale and
    /// returns the factor with the highest PSR. Ties prefer the factor
    /// closest to 1, then the earlier pool entry.
    pub fn estimate_scale(&self, frame: &Image, center: (f64, f64)) -> Result<ScaleEstimate> {
        let pad = self.scale.params.padding;
        let template = self.scale.template;
        let cells = (
            template.0 / self.config.cell_size,
            template.1 / self.config.cell_size,
        );
        let exclusion = fit_exclusion(self.config.psr_exclusion, cells);
        let candidates = par::map(
            &self.config.scale_pool,
            |&factor| -> Result<ScaleEstimate> {
                let s = self.state.scale * factor;
                let roi = region(&self.state, center.0, center.1, pad, s)?;
                let z = self.features(frame, FilterKind::Scale, &roi)?;
                let response = kcf::detect(&self.scale.model, &z)?;
                let psr = kcf::psr(&response, exclusion)?;
                Ok(ScaleEstimate {
                    factor,
                    psr,
                    response,
                    roi,
                })
            },
        );
        let mut best: Option<ScaleEstimate> = None;
        for c in candidates {
            let c = c?;
            let better = match &best {
                None => true,
                Some(b) => {
                    c.psr > b.psr
                        || (c.psr == b.psr && (c.factor - 1.0).abs() < (b.factor - 1.0).abs())
                }
            };
            if better {
                best = Some(c);
            }
        }
        Ok(best.expect("scale pool is non-empty"))
    }

    /// Tracks one frame and returns the new target state.
    pub fn step(&mut self, frame: &Image) -> Result<TargetState> {
        if frame.dims() != self.frame_dims {
            return Err(Error::dim(format!(
                "frame size changed from {:?} to {:?}",
                self.frame_dims,
                frame.dims()
            )));
        }
        self.fc += 1;
        let scheduled = select_filter(self.fc, self.config.n);
        let use_pf = self.pf_active();
        let window = self.config.pf_window;
        let mut report = StepReport::default();

        let prior = if use_pf {
            self.particles
                .predict(self.config.pf_noise_pos, self.config.pf_noise_vel)
        } else {
            (self.state.center_x, self.state.center_y)
        };

        let translation = if self.config.every_frame_l {
            Some(FilterKind::LargeTranslation)
        } else {
            match scheduled {
                FilterKind::Scale if self.config.scale_enabled => None,
                FilterKind::Scale => Some(FilterKind::LargeTranslation),
                k => Some(k),
            }
        };
        let run_scale = self.config.scale_enabled && scheduled == FilterKind::Scale;

        let mut center = prior;
        if let Some(kind) = translation {
            let slot = self.slot(kind);
            let roi = region(
                &self.state,
                center.0,
                center.1,
                slot.params.padding,
                self.state.scale,
            )?;
            let template = slot.template;
            let z = self.features(frame, kind, &roi)?;
            let response = kcf::detect(&self.slot(kind).model, &z)?;
            let (c, reference) = self.locate(&response, &roi, template);
            center = c;
            if use_pf {
                self.particles.weigh(&response, &reference, window);
            }
            report.dispatched.push(kind);
            report.filter_center = Some(center);
        }

        let mut scale_est = None;
        if run_scale {
            let est = self.estimate_scale(frame, center)?;
            self.state.scale *= est.factor;
            report.dispatched.push(FilterKind::Scale);
            report.scale_psr = Some(est.psr);
            report.scale_factor = Some(est.factor);
            if self.config.recenter_on_scale {
                let (c, reference) = self.locate(&est.response, &est.roi, self.scale.template);
                center = c;
                report.filter_center = Some(center);
                if use_pf {
                    self.particles.weigh(&est.response, &reference, window);
                }
            } else if use_pf {
                let (pcx, pcy) = est.roi.patch_center();
                let (pw, ph) = est.roi.patch_size();
                let reference = Roi {
                    center_x: pcx,
                    center_y: pcy,
                    width: pw as f64,
                    height: ph as f64,
                };
                self.particles.weigh(&est.response, &reference, window);
            }
            scale_est = Some(est);
        }

        if use_pf {
            center = self.particles.posterior_mean();
            let threshold = self.particles.len() as f64 / 2.0;
            self.particles.resample_if_needed(threshold);
        }
        self.state.center_x = center.0;
        self.state.center_y = center.1;

        if let Some(kind) = translation {
            self.refresh(frame, kind)?;
        }
        if let Some(est) = scale_est {
            if est.psr >= self.config.t_rs {
                self.refresh(frame, FilterKind::Scale)?;
                report.scale_model_updated = true;
            }
        }
        self.report = report;
        Ok(self.state)
    }

    /// Blends a sample at the current state into a filter's model.
    fn refresh(&mut self, frame: &Image, kind: FilterKind) -> Result<()> {
        let pad = self.slot(kind).params.padding;
        let roi = region(
            &self.state,
            self.state.center_x,
            self.state.center_y,
            pad,
            self.state.scale,
        )?;
        let x = self.features(frame, kind, &roi)?;
        kcf::update(&mut self.slot_mut(kind).model, &x)
    }
}

/// Padded region at `(cx, cy)` for the target at scale `s`.
fn region(state: &TargetState, cx: f64, cy: f64, padding: f64, s: f64) -> Result<Roi> {
    let grow = s * (1.0 + padding);
    Roi::new(cx, cy, state.base_width * grow, state.base_height * grow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{COLOR_NAMES, TABLE_ROWS};

    fn table() -> Arc<ColorNamingTable> {
        // Mass on the name picked by the brightest channel.
        let rows = (0..TABLE_ROWS)
            .map(|i| {
                let (r, g, b) = (i % 32, (i / 32) % 32, i / 1024);
                let mut row = [0.02; COLOR_NAMES];
                let k = if r >= g && r >= b {
                    0
                } else if g >= b {
                    1
                } else {
                    2
                };
                row[k] = 1.0 - 0.02 * (COLOR_NAMES - 1) as f64;
                row
            })
            .collect();
        Arc::new(ColorNamingTable::from_rows(rows).unwrap())
    }

    fn texture(x: f64, y: f64) -> [u8; 3] {
        let v = ((x * 0.31).sin() * (y * 0.23).cos() * 90.0
            + (x * 0.07 + y * 0.11).sin() * 60.0
            + 128.0) as u8;
        [v, v.wrapping_mul(7), 255 - v]
    }

    /// Textured background with a textured square of side `size` centered at
    /// `(cx, cy)`.
    fn scene(cx: f64, cy: f64, size: f64) -> Image {
        Image::from_fn(160, 120, 3, |x, y, px| {
            let (fx, fy) = (x as f64, y as f64);
            let (u, v) = ((fx - cx) / size, (fy - cy) / size);
            if u.abs() < 0.5 && v.abs() < 0.5 {
                let a = ((u * 8.0).floor() + (v * 8.0).floor()) as i64;
                let c = if a % 2 == 0 { 230 } else { 30 };
                px.copy_from_slice(&[c, 255 - c, c / 2]);
            } else {
                px.copy_from_slice(&texture(fx, fy));
            }
        })
        .unwrap()
    }

    fn small_config() -> SchedulerConfig {
        SchedulerConfig {
            particles: 200,
            ..SchedulerConfig::default()
        }
    }

    #[test]
    fn select_filter_cycle() {
        assert_eq!(select_filter(5, 5), FilterKind::Scale);
        assert_eq!(select_filter(1, 5), FilterKind::LargeTranslation);
        assert_eq!(select_filter(2, 5), FilterKind::LargeTranslation);
        assert_eq!(select_filter(3, 5), FilterKind::SmallTranslation);
        assert_eq!(select_filter(4, 5), FilterKind::SmallTranslation);
        let names: Vec<&str> = (1..=10)
            .map(|fc| select_filter(fc, 5).short_name())
            .collect();
        assert_eq!(
            names,
            ["L", "L", "S", "S", "Scale", "L", "L", "S", "S", "Scale"]
        );
        // Even n: n/2 is exact.
        let names: Vec<&str> = (1..=4)
            .map(|fc| select_filter(fc, 4).short_name())
            .collect();
        assert_eq!(names, ["L", "L", "S", "Scale"]);
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = SchedulerConfig::default();
        c.validate().unwrap();
        assert_eq!(c.scale_pool, vec![1.05, 1.0, 0.952381]);
        assert_eq!(c.params_l.learning_rate, 0.020);
        assert_eq!(c.params_scale.learning_rate, 0.010);
        assert_eq!(
            (
                c.params_l.padding,
                c.params_s.padding,
                c.params_scale.padding
            ),
            (2.0, 1.5, 0.0)
        );
        let bad = [
            SchedulerConfig { n: 1, ..c.clone() },
            SchedulerConfig {
                scale_pool: vec![],
                ..c.clone()
            },
            SchedulerConfig {
                scale_pool: vec![1.1, 0.9],
                ..c.clone()
            },
            SchedulerConfig {
                t_rs: 0.0,
                ..c.clone()
            },
            SchedulerConfig {
                pf_window: 4,
                ..c.clone()
            },
            SchedulerConfig {
                particles: 0,
                ..c.clone()
            },
        ];
        for b in bad {
            assert!(b.validate().is_err(), "{:?}", b);
        }
    }

    #[test]
    fn entries_round_trip() {
        let c = SchedulerConfig::default();
        let mut d = SchedulerConfig {
            n: 9,
            pf_enabled: false,
            seed: 1,
            ..SchedulerConfig::default()
        };
        d.params_s.kernel_bandwidth = 0.123;
        for (k, v) in c.entries() {
            d.set(&k, &v).unwrap();
        }
        assert_eq!(c, d);
        assert_eq!(c.digest(), d.digest());
        let pool = c
            .entries()
            .into_iter()
            .find(|(k, _)| k == "scale_pool")
            .unwrap();
        assert_eq!(pool.1, "1.05,1.0,0.952381");
        assert!(d.set("no_such_key", "1").is_err());
        assert!(d.set("n", "five").is_err());
        d.set("every_frame_L", "true").unwrap();
        assert!(d.every_frame_l);
        d.set("recenter_on_scale", "false").unwrap();
        assert!(!d.recenter_on_scale);
        assert_ne!(c.digest(), d.digest());
    }

    #[test]
    fn template_geometry() {
        assert_eq!(template_size(90.0, 90.0, 128, 4), (128, 128));
        assert_eq!(template_size(120.0, 60.0, 128, 4), (128, 64));
        assert_eq!(template_size(30.0, 90.0, 64, 4), (20, 64));
        assert_eq!(template_size(500.0, 5.0, 64, 4), (64, 16));
    }

    #[test]
    fn psr_window_fits_the_map() {
        assert_eq!(fit_exclusion(11, (32, 32)), 11);
        assert_eq!(fit_exclusion(11, (16, 5)), 11);
        assert_eq!(fit_exclusion(11, (8, 6)), 7);
        assert_eq!(fit_exclusion(11, (11, 4)), 9);
    }

    #[test]
    fn init_state() {
        let frame = scene(80.0, 60.0, 24.0);
        let bbox = Roi::new(80.0, 60.0, 24.0, 24.0).unwrap();
        let t = Tracker::new(&frame, bbox, small_config(), Some(table())).unwrap();
        assert_eq!(t.state().scale, 1.0);
        assert_eq!(t.frame_count(), 0);
        assert_eq!(t.particles().posterior_mean(), (80.0, 60.0));
        assert_eq!(
            t.params(FilterKind::LargeTranslation).feature_spec.kind,
            FeatureKind::FhogColor
        );
        assert_eq!(t.template(FilterKind::LargeTranslation), (128, 128));
        assert_eq!(t.template(FilterKind::Scale), (64, 64));

        let roi = region(t.state(), 80.0, 60.0, 2.0, 1.0).unwrap();
        let z = t
            .features(&frame, FilterKind::LargeTranslation, &roi)
            .unwrap();
        let r = kcf::detect(t.model(FilterKind::LargeTranslation), &z).unwrap();
        assert_eq!(r.peak_pos(), (0, 0));
    }

    #[test]
    fn init_errors() {
        let frame = scene(80.0, 60.0, 24.0);
        let outside = Roi::new(400.0, 60.0, 24.0, 24.0).unwrap();
        assert!(Tracker::new(&frame, outside, small_config(), Some(table())).is_err());
        let flat = Roi {
            center_x: 80.0,
            center_y: 60.0,
            width: 0.0,
            height: 10.0,
        };
        assert!(Tracker::new(&frame, flat, small_config(), Some(table())).is_err());
        let bbox = Roi::new(80.0, 60.0, 24.0, 24.0).unwrap();
        assert!(matches!(
            Tracker::new(&frame, bbox, small_config(), None),
            Err(Error::ColorTable(_))
        ));
    }

    #[test]
    fn grayscale_frames_drop_color_features() {
        let color = scene(80.0, 60.0, 24.0);
        let gray = Image::gray(160, 120, color.data().chunks(3).map(|p| p[0]).collect()).unwrap();
        let bbox = Roi::new(80.0, 60.0, 24.0, 24.0).unwrap();
        let mut t = Tracker::new(&gray, bbox, small_config(), None).unwrap();
        for k in [FilterKind::LargeTranslation, FilterKind::Scale] {
            assert_eq!(t.params(k).feature_spec.kind, FeatureKind::Fhog);
        }
        t.step(&gray).unwrap();
    }

    #[test]
    fn identical_frames_keep_scale_one() {
        let frame = scene(80.0, 60.0, 24.0);
        let bbox = Roi::new(80.0, 60.0, 24.0, 24.0).unwrap();
        let t = Tracker::new(&frame, bbox, small_config(), Some(table())).unwrap();
        let est = t.estimate_scale(&frame, (80.0, 60.0)).unwrap();
        assert_eq!(est.factor, 1.0);
        assert_eq!(est.response.peak_pos(), (0, 0));
    }

    #[test]
    fn static_target_stays_put() {
        let frame = scene(80.0, 60.0, 24.0);
        let bbox = Roi::new(80.0, 60.0, 24.0, 24.0).unwrap();
        let mut t = Tracker::new(&frame, bbox, SchedulerConfig::default(), Some(table())).unwrap();
        let cell_px = 4.0 * 72.0 / 128.0;
        // 0.952381 is 1/1.05 to six places, so products drift slightly.
        let step = 1.05f64.ln() + 1e-6;
        for fc in 1..=60u64 {
            let s = t.step(&frame).unwrap();
            assert_eq!(t.frame_count(), fc);
            assert!((s.center_x - 80.0).abs() <= cell_px, "{:?}", s);
            assert!((s.center_y - 60.0).abs() <= cell_px, "{:?}", s);
            // PSR may prefer a neighbouring pool entry, never a runaway.
            assert!(s.scale.ln().abs() <= step, "{:?}", s);
        }
    }

    #[test]
    fn dispatch_follows_the_cycle() {
        let frame = scene(80.0, 60.0, 24.0);
        let bbox = Roi::new(80.0, 60.0, 24.0, 24.0).unwrap();
        let mut t = Tracker::new(&frame, bbox, small_config(), Some(table())).unwrap();
        let mut seen = Vec::new();
        for _ in 0..10 {
            t.step(&frame).unwrap();
            seen.extend(t.last_report().dispatched.iter().map(|k| k.short_name()));
        }
        assert_eq!(
            seen,
            ["L", "L", "S", "S", "Scale", "L", "L", "S", "S", "Scale"]
        );

        let mut t = Tracker::new(&frame, bbox, small_config().low_fps(), Some(table())).unwrap();
        let mut seen = Vec::new();
        for _ in 0..5 {
            t.step(&frame).unwrap();
            seen.push(t.last_report().dispatched.clone());
        }
        let l = FilterKind::LargeTranslation;
        assert_eq!(seen[..4], [vec![l], vec![l], vec![l], vec![l]]);
        assert_eq!(seen[4], vec![l, FilterKind::Scale]);
    }

    #[test]
    fn without_particles_the_filter_center_is_returned() {
        let bbox = Roi::new(80.0, 60.0, 24.0, 24.0).unwrap();
        let cfg = SchedulerConfig {
            pf_enabled: false,
            ..small_config()
        };
        let mut t = Tracker::new(&scene(80.0, 60.0, 24.0), bbox, cfg, Some(table())).unwrap();
        for i in 1..=5 {
            let s = t.step(&scene(80.0 + 2.0 * i as f64, 60.0, 24.0)).unwrap();
            assert_eq!(
                Some((s.center_x, s.center_y)),
                t.last_report().filter_center
            );
        }
    }

    #[test]
    fn frame_size_change_is_an_error() {
        let bbox = Roi::new(80.0, 60.0, 24.0, 24.0).unwrap();
        let mut t = Tracker::new(
            &scene(80.0, 60.0, 24.0),
            bbox,
            small_config(),
            Some(table()),
        )
        .unwrap();
        let other = Image::rgb(100, 100, vec![0; 30000]).unwrap();
        assert!(t.step(&other).is_err());
    }

    #[test]
    fn seeded_runs_repeat() {
        let bbox = Roi::new(80.0, 60.0, 24.0, 24.0).unwrap();
        let run = || {
            let mut t = Tracker::new(
                &scene(80.0, 60.0, 24.0),
                bbox,
                small_config(),
                Some(table()),
            )
            .unwrap();
            (1..=7)
                .map(|i| {
                    t.step(&scene(80.0 + i as f64, 60.0 - i as f64, 24.0))
                        .unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
