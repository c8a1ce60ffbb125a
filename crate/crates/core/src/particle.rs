//! Constant-velocity particle filter over the target's image position.
//!
//! Each frame the particles drift by their velocity plus Gaussian process
//! noise, are weighted by the correlation response around the position they
//! map to, and are resampled systematically once the effective sample size
//! falls below a threshold. The posterior mean is the smoothed target center.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::features::Roi;
use crate::kcf::ResponseMap;
use crate::par;

/// Weight given to particles whose neighborhood carries no positive
/// response, including those outside the response map.
pub const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct ParticleSet {
    particles: Vec<Particle>,
    rng: ChaCha8Rng,
    seed: u64,
}

impl ParticleSet {
    /// `count` particles at `(x, y)` with zero velocity and equal weight.
    pub fn new(count: usize, x: f64, y: f64, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::param("particle set needs at least one particle"));
        }
        let w = 1.0 / count as f64;
        let p = Particle {
            x,
            y,
            vx: 0.0,
            vy: 0.0,
            weight: w,
        };
        Ok(ParticleSet {
            particles: vec![p; count],
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        })
    }

    /// Wraps explicit particles; weights are renormalised to sum to one.
    pub fn from_particles(mut particles: Vec<Particle>, seed: u64) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::param("particle set needs at least one particle"));
        }
        let total: f64 = particles.iter().map(|p| p.weight).sum();
        if particles.iter().any(|p| !(p.weight >= 0.0)) || !(total > 0.0) {
            return Err(Error::param(
                "particle weights must be >= 0 with a positive sum",
            ));
        }
        particles.iter_mut().for_each(|p| p.weight /= total);
        Ok(ParticleSet {
            particles,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Moves every particle by its velocity and perturbs position and
    /// velocity with zero-mean Gaussian noise. Returns the prior mean.
    pub fn predict(&mut self, noise_pos: f64, noise_vel: f64) -> (f64, f64) {
        let pos = (noise_pos > 0.0).then(|| Normal::new(0.0, noise_pos).unwrap());
        let vel = (noise_vel > 0.0).then(|| Normal::new(0.0, noise_vel).unwrap());
        for p in &mut self.particles {
            p.x += p.vx;
            p.y += p.vy;
            if let Some(n) = &pos {
                p.x += n.sample(&mut self.rng);
                p.y += n.sample(&mut self.rng);
            }
            if let Some(n) = &vel {
                p.vx += n.sample(&mut self.rng);
                p.vy += n.sample(&mut self.rng);
            }
        }
        self.posterior_mean()
    }

    /// Multiplies each weight by the response mass in a `window × window`
    /// cell neighborhood of where the particle falls on the response map. `roi` is
    /// the image region the response was computed over; its center is the
    /// zero-shift cell.
    pub fn weigh(&mut self, response: &ResponseMap, roi: &Roi, window: usize) {
        let (w, h) = response.dims();
        let cell_w = roi.width / w as f64;
        let cell_h = roi.height / h as f64;
        let half = (window / 2) as isize;
        let vals = response.values();
        let (lo_x, hi_x) = (-(((w - 1) / 2) as isize), (w / 2) as isize);
        let (lo_y, hi_y) = (-(((h - 1) / 2) as isize), (h / 2) as isize);

        par::for_each_mut(&mut self.particles, 128, |p| {
            let sx = ((p.x - roi.center_x) / cell_w + 0.5).floor();
            let sy = ((p.y - roi.center_y) / cell_h + 0.5).floor();
            if !(sx.is_finite() && sy.is_finite()) {
                p.weight = WEIGHT_FLOOR;
                return;
            }
            let (sx, sy) = (sx as isize, sy as isize);
            if sx < lo_x || sx > hi_x || sy < lo_y || sy > hi_y {
                p.weight = WEIGHT_FLOOR;
                return;
            }
            let mut sum = 0.0;
            for dy in -half..=half {
                let iy = (sy + dy).rem_euclid(h as isize) as usize;
                for dx in -half..=half {
                    let ix = (sx + dx).rem_euclid(w as isize) as usize;
                    sum += vals.get(ix, iy).max(0.0);
                }
            }
            p.weight = (p.weight * sum).max(WEIGHT_FLOOR);
        });
        self.normalize();
    }

    fn normalize(&mut self) {
        let total: f64 = self.particles.iter().map(|p| p.weight).sum();
        let inv = 1.0 / total;
        self.particles.iter_mut().for_each(|p| p.weight *= inv);
    }

    /// `1 / Σ w²`.
    pub fn effective_sample_size(&self) -> Result<f64> {
        let s: f64 = self.particles.iter().map(|p| p.weight * p.weight).sum();
        if !(s > 0.0) {
            return Err(Error::Numeric("all particle weights are zero".into()));
        }
        Ok(1.0 / s)
    }

    /// Systematic resampling when the effective sample size drops below
    /// `threshold`. Returns whether the set was resampled.
    pub fn resample_if_needed(&mut self, threshold: f64) -> bool {
        let n_eff = match self.effective_sample_size() {
            Ok(n) => n,
            Err(_) => return false,
        };
        if n_eff >= threshold {
            return false;
        }
        let n = self.particles.len();
        let offset = self.rng.random::<f64>() / n as f64;
        let weights: Vec<f64> = self.particles.iter().map(|p| p.weight).collect();
        let w = 1.0 / n as f64;
        self.particles = systematic_indices(&weights, offset)
            .into_iter()
            .map(|i| Particle {
                weight: w,
                ..self.particles[i]
            })
            .collect();
        true
    }

    /// Weighted mean position.
    pub fn posterior_mean(&self) -> (f64, f64) {
        // Offsets from the first particle keep identical particles exact.
        let (x0, y0) = (self.particles[0].x, self.particles[0].y);
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for p in &self.particles {
            sx += p.weight * (p.x - x0);
            sy += p.weight * (p.y - y0);
            sw += p.weight;
        }
        (x0 + sx / sw, y0 + sy / sw)
    }
}

/// Systematic resampling: with pointers `offset + k/N` for `k = 0..N` and
/// `offset ∈ [0, 1/N)`, returns the index of the particle whose cumulative
/// weight interval contains each pointer. `weights` must sum to one.
pub fn systematic_indices(weights: &[f64], offset: f64) -> Vec<usize> {
    let n = weights.len();
    let step = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut j = 0;
    for k in 0..n {
        let u = offset + k as f64 * step;
        while u >= cum && j + 1 < n {
            j += 1;
            cum += weights[j];
        }
        out.push(j);
    }
    out
}
