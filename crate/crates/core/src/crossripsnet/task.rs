//! Synthetic circles task: pairs of one-circle / two-circle clouds with
//! cross-persistence targets.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{density_on_line, TrainSample};
use crate::geometry::PointCloud;
use crate::persistence::{cross_barcode, MaxScale, PersistenceDiagram};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::{mtd_samples, MtdSampling};
use crate::summaries::{diagram_bandwidth, expected_density, fit_grid, GridSpec, Weighting};
use crate::synth::circle;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirclesTaskConfig {
    pub n_pairs: usize,
    /// Points per cloud.
    pub points: usize,
    /// Subsample pairs averaged into each target.
    pub subsamples: usize,
    pub subsample_size: usize,
    pub hom_dim: usize,
    pub nx: usize,
    pub ny: usize,
    pub seed: u64,
}

impl Default for CirclesTaskConfig {
    fn default() -> Self {
        Self {
            n_pairs: 200,
            points: 48,
            subsamples: 8,
            subsample_size: 32,
            hom_dim: 1,
            nx: 8,
            ny: 8,
            seed: 0,
        }
    }
}

/// One circle (class 0) or two circles (class 1), randomly scaled.
fn circles_cloud(class: usize, n: usize, rng: &mut crate::rng::Rng) -> Result<PointCloud> {
    let s = rng.random_range(0.6..1.4);
    let pts = if class == 0 {
        circle(n, s, [0.0, 0.0], 0.03, rng)
    } else {
        let mut p = circle(n / 2, 0.5 * s, [-0.6 * s, 0.0], 0.03, rng);
        p.extend(circle(n - n / 2, 0.5 * s, [0.6 * s, 0.0], 0.03, rng));
        p
    };
    PointCloud::new(pts)
}

/// Pairs whose left/right classes cycle through all four combinations.
pub fn circles_pairs(cfg: &CirclesTaskConfig) -> Result<Vec<(PointCloud, PointCloud)>> {
    (0..cfg.n_pairs)
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, k as u64));
            Ok((circles_cloud(k % 2, cfg.points, &mut rng)?, circles_cloud((k / 2) % 2, cfg.points, &mut rng)?))
        })
        .collect()
}

fn sampling(cfg: &CirclesTaskConfig, k: usize) -> MtdSampling {
    MtdSampling {
        n_pairs: cfg.subsamples,
        subsample_size: cfg.subsample_size,
        hom_dim: cfg.hom_dim,
        seed: derive_seed(cfg.seed ^ 0xd1a9, k as u64),
        shared_subsamples: false,
    }
}

/// Cross-barcodes of random subsample pairs, as in [`mtd_samples`].
fn subsample_diagrams(left: &PointCloud, right: &PointCloud, s: &MtdSampling) -> Result<Vec<PersistenceDiagram>> {
    use rand::seq::index::sample;
    (0..s.n_pairs)
        .map(|j| {
            let mut rng = rng_from_seed(derive_seed(s.seed, j as u64));
            let mut a = sample(&mut rng, left.len(), s.subsample_size).into_vec();
            let mut b = sample(&mut rng, right.len(), s.subsample_size).into_vec();
            a.sort_unstable();
            b.sort_unstable();
            cross_barcode(&left.select(&a)?, &right.select(&b)?, s.hom_dim, MaxScale::Auto)
        })
        .collect()
}

/// Targets are normalized expected persistence images of the cross-barcodes
/// on one grid frozen over the whole dataset.
pub fn circles_task(cfg: &CirclesTaskConfig) -> Result<Vec<TrainSample>> {
    let pairs = circles_pairs(cfg)?;
    let diagrams: Vec<Vec<PersistenceDiagram>> = pairs
        .par_iter()
        .enumerate()
        .map(|(k, (l, r))| subsample_diagrams(l, r, &sampling(cfg, k)))
        .collect::<Result<_>>()?;
    let pooled: Vec<PersistenceDiagram> = diagrams.iter().flatten().cloned().collect();
    let bw = diagram_bandwidth(&pooled)?;
    let grid = fit_grid(&pooled, bw, cfg.nx, cfg.ny)?;
    let weighting = Weighting::default_for_dim(cfg.hom_dim);
    pairs
        .into_iter()
        .zip(diagrams)
        .map(|((left, right), ds)| {
            let mut target = expected_density(&ds, &grid, bw, weighting, false)?;
            if !(target.sum() > 0.0) {
                // no finite pairs at all: spread the mass uniformly
                target.values.iter_mut().for_each(|v| *v = 1.0);
            }
            target.normalize()?;
            Ok(TrainSample { left, right, target })
        })
        .collect()
}

/// MTD samples per pair plus the shared one-row grid for their densities.
pub struct MtdTask {
    pub samples: Vec<TrainSample>,
    pub mtd_values: Vec<Vec<f64>>,
    pub grid: GridSpec,
}

/// Targets are KDEs of per-pair MTD samples rasterized on a fixed grid that
/// spans every pair's KDE support.
pub fn circles_mtd_task(cfg: &CirclesTaskConfig) -> Result<MtdTask> {
    let pairs = circles_pairs(cfg)?;
    let values: Vec<Vec<f64>> = pairs
        .par_iter()
        .enumerate()
        .map(|(k, (l, r))| mtd_samples(l, r, &sampling(cfg, k)))
        .collect::<Result<_>>()?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in &values {
        let kde = crate::stats::kde1d(v, crate::stats::Bandwidth::Auto)?;
        lo = lo.min(kde.z_min);
        hi = hi.max(kde.z_max);
    }
    if !(hi > lo) {
        return Err(Error::invalid("degenerate MTD range"));
    }
    let grid = GridSpec::line(lo, hi, cfg.nx)?;
    let samples = pairs
        .into_iter()
        .zip(&values)
        .map(|((left, right), v)| Ok(TrainSample { left, right, target: density_on_line(v, grid)? }))
        .collect::<Result<_>>()?;
    Ok(MtdTask { samples, mtd_values: values, grid })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> CirclesTaskConfig {
        CirclesTaskConfig { n_pairs: 4, points: 16, subsamples: 3, subsample_size: 12, nx: 4, ny: 4, ..Default::default() }
    }

    #[test]
    fn targets_are_normalized_on_one_grid() {
        let d = circles_task(&tiny()).unwrap();
        assert_eq!(d.len(), 4);
        for s in &d {
            assert!((s.target.sum() - 1.0).abs() < 1e-9);
            assert_eq!(s.target.spec, d[0].target.spec);
        }
    }

    #[test]
    fn mtd_targets_are_lines() {
        let t = circles_mtd_task(&tiny()).unwrap();
        assert_eq!(t.grid.ny, 1);
        assert!(t.samples.iter().all(|s| (s.target.sum() - 1.0).abs() < 1e-9));
    }
}
