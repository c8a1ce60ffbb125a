//! Synthetic tracking scenes and fixtures.
//!
//! Scenes are a smooth procedural background with a textured square target
//! drawn on top. The target texture lives in object coordinates, so a zoom
//! enlarges the pattern rather than revealing more of it. Everything is
//! seeded and reproducible.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use enkcf::features::{COLOR_NAMES, TABLE_ROWS};
use enkcf::{ColorNamingTable, Image, Rect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sum of random plane waves per color channel around a base color.
#[derive(Clone, Debug)]
pub struct Texture {
    base: [f64; 3],
    waves: Vec<Wave>,
}

#[derive(Clone, Debug)]
struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: [f64; 3],
}

impl Texture {
    /// `count` waves with spatial frequencies in `freq` (radians per unit)
    /// and per-channel amplitudes up to `amp`.
    pub fn random(seed: u64, base: [f64; 3], count: usize, freq: (f64, f64), amp: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..count)
            .map(|_| {
                let f = rng.random_range(freq.0..freq.1);
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                Wave {
                    fx: f * theta.cos(),
                    fy: f * theta.sin(),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                    amp: [
                        rng.random_range(-amp..amp),
                        rng.random_range(-amp..amp),
                        rng.random_range(-amp..amp),
                    ],
                }
            })
            .collect();
        Texture { base, waves }
    }

    pub fn sample(&self, x: f64, y: f64) -> [u8; 3] {
        let mut c = self.base;
        for w in &self.waves {
            let s = (w.fx * x + w.fy * y + w.phase).sin();
            for (ck, a) in c.iter_mut().zip(w.amp) {
                *ck += a * s;
            }
        }
        c.map(|v| v.round().clamp(0.0, 255.0) as u8)
    }
}

/// Geometry and appearance of a generated sequence. The target center moves
/// at constant velocity; its side grows by `zoom` once every `zoom_every`
/// frames.
#[derive(Clone, Debug)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub size: f64,
    pub start: (f64, f64),
    pub velocity: (f64, f64),
    pub zoom: f64,
    pub zoom_every: usize,
    pub seed: u64,
}

impl SceneSpec {
    /// A still target of side `size` in the middle of the frame.
    pub fn still(width: usize, height: usize, frames: usize, size: f64, seed: u64) -> Self {
        SceneSpec {
            width,
            height,
            frames,
            size,
            start: (width as f64 / 2.0, height as f64 / 2.0),
            velocity: (0.0, 0.0),
            zoom: 1.0,
            zoom_every: 1,
            seed,
        }
    }

    pub fn moving(mut self, start: (f64, f64), velocity: (f64, f64)) -> Self {
        self.start = start;
        self.velocity = velocity;
        self
    }

    pub fn zooming(mut self, zoom: f64, every: usize) -> Self {
        self.zoom = zoom;
        self.zoom_every = every.max(1);
        self
    }

    /// Cumulative zoom at frame `fc`.
    pub fn scale_at(&self, fc: usize) -> f64 {
        self.zoom.powi((fc / self.zoom_every) as i32)
    }

    /// Ground-truth box at frame `fc`.
    pub fn box_at(&self, fc: usize) -> Rect {
        let side = self.size * self.scale_at(fc);
        let cx = self.start.0 + self.velocity.0 * fc as f64;
        let cy = self.start.1 + self.velocity.1 * fc as f64;
        Rect::new(cx - side / 2.0, cy - side / 2.0, side, side)
    }
}

/// Renders frames of a [`SceneSpec`] on demand.
#[derive(Clone, Debug)]
pub struct Scene {
    spec: SceneSpec,
    background: Texture,
    target: Texture,
}

impl Scene {
    pub fn new(spec: SceneSpec) -> Self {
        let background = Texture::random(spec.seed, [120.0, 125.0, 110.0], 12, (0.03, 0.35), 28.0);
        let target = Texture::random(
            spec.seed.wrapping_add(1),
            [170.0, 90.0, 60.0],
            10,
            (6.0, 30.0),
            55.0,
        );
        Scene {
            spec,
            background,
            target,
        }
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.frames
    }

    pub fn is_empty(&self) -> bool {
        self.spec.frames == 0
    }

    pub fn box_at(&self, fc: usize) -> Rect {
        self.spec.box_at(fc)
    }

    pub fn frame(&self, fc: usize) -> Image {
        let b = self.box_at(fc);
        Image::from_fn(self.spec.width, self.spec.height, 3, |x, y, px| {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let u = (fx - b.x) / b.width - 0.5;
            let v = (fy - b.y) / b.height - 0.5;
            let c = if u.abs() < 0.5 && v.abs() < 0.5 {
                // A dark frame inside the border keeps the target distinct
                // from any background.
                if u.abs() > 0.44 || v.abs() > 0.44 {
                    [25, 25, 35]
                } else {
                    self.target.sample(u, v)
                }
            } else {
                self.background.sample(fx, fy)
            };
            px.copy_from_slice(&c);
        })
        .expect("scene dimensions are positive")
    }

    pub fn boxes(&self) -> Vec<Rect> {
        (0..self.len()).map(|fc| self.box_at(fc)).collect()
    }
}

// Prototype colors of the 11 basic color names, in the conventional order:
// black, blue, brown, grey, green, orange, pink, purple, red, white, yellow.
const PROTOTYPES: [[f64; 3]; COLOR_NAMES] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.0, 255.0],
    [139.0, 69.0, 19.0],
    [128.0, 128.0, 128.0],
    [0.0, 160.0, 0.0],
    [255.0, 140.0, 0.0],
    [255.0, 150.0, 200.0],
    [128.0, 0.0, 160.0],
    [220.0, 0.0, 0.0],
    [255.0, 255.0, 255.0],
    [255.0, 240.0, 0.0],
];

/// A smooth stand-in for a learned color-naming table: each bin's
/// probabilities are a softmax over negative squared distances from the
/// bin center to the 11 prototype colors.
pub fn prototype_color_table() -> ColorNamingTable {
    let temp = 2.0 * 45.0 * 45.0;
    let rows = (0..TABLE_ROWS)
        .map(|i| {
            let c = [
                (i % 32) as f64 * 8.0 + 4.0,
                ((i / 32) % 32) as f64 * 8.0 + 4.0,
                (i / 1024) as f64 * 8.0 + 4.0,
            ];
            let d: Vec<f64> = PROTOTYPES
                .iter()
                .map(|p| (0..3).map(|k| (c[k] - p[k]).powi(2)).sum::<f64>() / temp)
                .collect();
            let m = d.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut row = [0.0; COLOR_NAMES];
            for (r, di) in row.iter_mut().zip(&d) {
                *r = (m - di).exp();
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|r| *r /= s);
            row
        })
        .collect();
    ColorNamingTable::from_rows(rows).expect("softmax rows are normalised")
}

pub fn write_color_table(path: impl AsRef<Path>, table: &ColorNamingTable) -> io::Result<()> {
    fs::write(path, table.to_text())
}

pub fn to_rgb_image(img: &Image) -> image::RgbImage {
    let (w, h) = img.dims();
    let data = if img.is_color() {
        img.data().to_vec()
    } else {
        img.data().iter().flat_map(|&v| [v, v, v]).collect()
    };
    image::RgbImage::from_raw(w as u32, h as u32, data).expect("buffer matches dimensions")
}

/// Writes `scene` as an OTB-style folder `dir` (`img/0001.png`, … and
/// `groundtruth_rect.txt`).
pub fn write_otb_sequence(dir: impl AsRef<Path>, scene: &Scene) -> io::Result<PathBuf> {
    let dir = dir.as_ref();
    let img_dir = dir.join("img");
    fs::create_dir_all(&img_dir)?;
    let mut gt = String::new();
    for fc in 0..scene.len() {
        to_rgb_image(&scene.frame(fc))
            .save(img_dir.join(format!("{:04}.png", fc + 1)))
            .map_err(io::Error::other)?;
        let b = scene.box_at(fc);
        gt.push_str(&format!("{},{},{},{}\n", b.x, b.y, b.width, b.height));
    }
    fs::write(dir.join("groundtruth_rect.txt"), gt)?;
    Ok(dir.to_path_buf())
}

/// Two short toy sequences, `Drift` and `Still`, under `root`.
pub fn write_toy_dataset(root: impl AsRef<Path>) -> io::Result<Vec<PathBuf>> {
    let root = root.as_ref();
    let drift =
        Scene::new(SceneSpec::still(160, 120, 12, 28.0, 3).moving((60.0, 55.0), (1.5, 0.5)));
    let still = Scene::new(SceneSpec::still(160, 120, 8, 32.0, 11));
    Ok(vec![
        write_otb_sequence(root.join("Drift"), &drift)?,
        write_otb_sequence(root.join("Still"), &still)?,
    ])
}
