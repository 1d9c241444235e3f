//! Synthetic point clouds and time series for experiments and tests.

use std::f64::consts::TAU;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{PointCloud, TimeSeries};
use crate::rng::{rng_from_seed, Rng};
use crate::{Error, Result};

fn gauss(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `n` points uniformly on a circle with Gaussian jitter.
pub fn circle(n: usize, radius: f64, center: [f64; 2], jitter: f64, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let t = rng.random_range(0.0..TAU);
            vec![
                center[0] + radius * t.cos() + jitter * gauss(rng),
                center[1] + radius * t.sin() + jitter * gauss(rng),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// Unit circle at the origin.
    Circle,
    /// Two circles of radius 0.5 centered at `(±0.6, 0)`.
    TwoCircles,
    /// Three isotropic Gaussian blobs.
    Blobs,
    /// Lemniscate of Gerono.
    FigureEight,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::Circle, Shape::TwoCircles, Shape::Blobs, Shape::FigureEight];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Circle => "circle",
            Shape::TwoCircles => "two_circles",
            Shape::Blobs => "blobs",
            Shape::FigureEight => "figure_eight",
        }
    }
}

/// `n` points uniform in `[-1, 1]^dim`.
pub fn uniform_cloud(n: usize, dim: usize, seed: u64) -> Result<PointCloud> {
    let mut rng = rng_from_seed(seed);
    PointCloud::from_flat(dim, (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect())
}

pub fn sample_shape(shape: Shape, n: usize, jitter: f64, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::Empty("shape sample"));
    }
    let mut rng = rng_from_seed(seed);
    let points = match shape {
        Shape::Circle => circle(n, 1.0, [0.0, 0.0], jitter, &mut rng),
        Shape::TwoCircles => {
            let half = n / 2;
            let mut p = circle(half, 0.5, [-0.6, 0.0], jitter, &mut rng);
            p.extend(circle(n - half, 0.5, [0.6, 0.0], jitter, &mut rng));
            p
        }
        Shape::Blobs => {
            let centers = [[0.8, 0.0], [-0.4, 0.7], [-0.4, -0.7]];
            (0..n)
                .map(|k| {
                    let c = centers[k % 3];
                    vec![c[0] + 0.15 * gauss(&mut rng), c[1] + 0.15 * gauss(&mut rng)]
                })
                .collect()
        }
        Shape::FigureEight => (0..n)
            .map(|_| {
                let t = rng.random_range(0.0..TAU);
                vec![t.cos() + jitter * gauss(&mut rng), t.sin() * t.cos() + jitter * gauss(&mut rng)]
            })
            .collect(),
    };
    PointCloud::new(points)
}

/// One cloud per shape in [`Shape::ALL`], each from its own seed stream.
pub fn shape_dataset(n: usize, jitter: f64, seed: u64) -> Result<Vec<PointCloud>> {
    Shape::ALL
        .iter()
        .enumerate()
        .map(|(k, &s)| sample_shape(s, n, jitter, crate::rng::derive_seed(seed, k as u64)))
        .collect()
}

/// Maps a cloud isometrically into `ambient_dim` dimensions through a random
/// orthonormal frame, then translates it by a random vector of norm `offset`.
pub fn embed_isometric(cloud: &PointCloud, ambient_dim: usize, offset: f64, seed: u64) -> Result<PointCloud> {
    let d = cloud.dim();
    if ambient_dim < d {
        return Err(Error::invalid(format!("ambient dimension {ambient_dim} < cloud dimension {d}")));
    }
    let mut rng = rng_from_seed(seed);
    // Gram-Schmidt on Gaussian vectors
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d);
    while frame.len() < d {
        let mut v: Vec<f64> = (0..ambient_dim).map(|_| gauss(&mut rng)).collect();
        for u in &frame {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            frame.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    let mut shift: Vec<f64> = (0..ambient_dim).map(|_| gauss(&mut rng)).collect();
    let sn = shift.iter().map(|a| a * a).sum::<f64>().sqrt();
    shift.iter_mut().for_each(|a| *a *= offset / sn);
    let points = cloud
        .points()
        .map(|p| {
            let mut out = shift.clone();
            for (c, u) in p.iter().zip(&frame) {
                out.iter_mut().zip(u).for_each(|(o, b)| *o += c * b);
            }
            out
        })
        .collect();
    PointCloud::new(points)
}

/// Gaussian-windowed chirp at a random position, plus white noise.
pub fn chirp_series(len: usize, amplitude: f64, noise_sd: f64, rng: &mut Rng) -> Result<TimeSeries> {
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let l = len as f64;
    let t0 = rng.random_range(0.3 * l..0.7 * l);
    let width = rng.random_range(0.1 * l..0.2 * l);
    let f0 = rng.random_range(0.01..0.03);
    let rate = rng.random_range(0.05..0.15) / l;
    let values = (0..len)
        .map(|k| {
            let t = k as f64;
            let env = (-((t - t0) / width).powi(2)).exp();
            amplitude * env * (TAU * (f0 + rate * (t - t0)) * (t - t0)).sin() + noise.sample(rng)
        })
        .collect();
    TimeSeries::new(values)
}

pub fn noise_series(len: usize, noise_sd: f64, rng: &mut Rng) -> Result<TimeSeries> {
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    TimeSeries::new((0..len).map(|_| noise.sample(rng)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChirpConfig {
    pub len: usize,
    pub amplitude: f64,
    pub noise_sd: f64,
}

impl Default for ChirpConfig {
    fn default() -> Self {
        Self {
            len: 256,
            amplitude: 1.5,
            noise_sd: 1.0,
        }
    }
}

/// `n` labelled series, alternating chirp (label 1) and pure noise (label 0).
pub fn chirp_dataset(n: usize, cfg: &ChirpConfig, seed: u64) -> Result<Vec<(TimeSeries, usize)>> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|k| {
            if k % 2 == 0 {
                Ok((chirp_series(cfg.len, cfg.amplitude, cfg.noise_sd, &mut rng)?, 1))
            } else {
                Ok((noise_series(cfg.len, cfg.noise_sd, &mut rng)?, 0))
            }
        })
        .collect()
}
