//! Densities of MTD values and the overlap-based distinction procedure.
//!
//! The comparison works on scalar samples: MTD values of cross-barcodes
//! between random subsamples of two clouds. A Gaussian KDE turns each sample
//! set into a density, and the overlap `O(p, q) = ∫ min(p, q)` scores how
//! compatible the candidate density is with the core cloud's self-density.

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{inject_noise, PointCloud};
use crate::persistence::{cross_barcode, MaxScale, PersistenceDiagram, PersistencePair};
use crate::rng::{derive_seed, rng_from_seed};
use crate::summaries::mtd;
use crate::{Error, Result};

/// Number of cells on a KDE's own evaluation grid.
pub const KDE_GRID_POINTS: usize = 512;
/// Number of points on the union grid used by [`overlap`].
pub const OVERLAP_GRID_POINTS: usize = 2048;

/// Silverman's rule `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`.
///
/// Falls back to the standard deviation when the IQR is zero, and to
/// `1e-3 * max(1, |x|)` when all samples coincide.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n == 0 {
        return 1e-3;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    if h > 0.0 {
        h
    } else {
        1e-3 * mean.abs().max(1.0)
    }
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn trapezoid(z: &[f64], f: &[f64]) -> f64 {
    z.windows(2)
        .zip(f.windows(2))
        .map(|(zz, ff)| 0.5 * (zz[1] - zz[0]) * (ff[0] + ff[1]))
        .sum()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

/// Gaussian KDE of scalar samples with its evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarDensity {
    pub samples: Vec<f64>,
    pub bandwidth: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub nz: usize,
}

impl ScalarDensity {
    pub fn evaluate(&self, z: f64) -> f64 {
        let h = self.bandwidth;
        let c = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h * self.samples.len() as f64);
        c * self
            .samples
            .iter()
            .map(|s| {
                let u = (z - s) / h;
                (-0.5 * u * u).exp()
            })
            .sum::<f64>()
    }

    pub fn grid(&self) -> Vec<f64> {
        linspace(self.z_min, self.z_max, self.nz)
    }

    /// `(z, density)` on the density's own grid.
    pub fn curve(&self) -> Vec<(f64, f64)> {
        self.grid().into_iter().map(|z| (z, self.evaluate(z))).collect()
    }

    /// Trapezoid integral over the evaluation grid.
    pub fn mass(&self) -> f64 {
        let z = self.grid();
        let f: Vec<f64> = z.iter().map(|&z| self.evaluate(z)).collect();
        trapezoid(&z, &f)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        let n = self.samples.len();
        (self.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64).sqrt()
    }
}

/// Gaussian KDE; the grid spans `[min - 3h, max + 3h]`.
pub fn kde1d(samples: &[f64], bandwidth: Bandwidth) -> Result<ScalarDensity> {
    if samples.len() < 2 {
        return Err(Error::invalid(format!("KDE needs at least 2 samples, got {}", samples.len())));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("KDE samples must be finite"));
    }
    let h = match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(samples),
        Bandwidth::Fixed(h) if h > 0.0 => h,
        Bandwidth::Fixed(h) => return Err(Error::invalid(format!("bandwidth must be > 0, got {h}"))),
    };
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ScalarDensity {
        samples: samples.to_vec(),
        bandwidth: h,
        z_min: lo - 3.0 * h,
        z_max: hi + 3.0 * h,
        nz: KDE_GRID_POINTS,
    })
}

/// Trapezoid integral of `min(p, q)` over sampled values; no renormalization.
pub fn overlap_on_grid(z: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| a.min(*b)).collect();
    trapezoid(z, &m)
}

/// `∫ min(p, q)` on the union of both grids (2048 points), each density first
/// renormalized on that grid; clipped to `[0, 1]`.
pub fn overlap(p: &ScalarDensity, q: &ScalarDensity) -> f64 {
    let z = linspace(p.z_min.min(q.z_min), p.z_max.max(q.z_max), OVERLAP_GRID_POINTS);
    let mut fp: Vec<f64> = z.iter().map(|&z| p.evaluate(z)).collect();
    let mut fq: Vec<f64> = z.iter().map(|&z| q.evaluate(z)).collect();
    for f in [&mut fp, &mut fq] {
        let mass = trapezoid(&z, f);
        if mass > 0.0 {
            f.iter_mut().for_each(|v| *v /= mass);
        }
    }
    overlap_on_grid(&z, &fp, &fq).clamp(0.0, 1.0)
}

/// How MTD samples are drawn from a pair of clouds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtdSampling {
    pub n_pairs: usize,
    pub subsample_size: usize,
    pub hom_dim: usize,
    pub seed: u64,
    /// Reuse one index set for both clouds (they must have equal sizes).
    #[serde(default)]
    pub shared_subsamples: bool,
}

impl Default for MtdSampling {
    fn default() -> Self {
        Self {
            n_pairs: 100,
            subsample_size: 128,
            hom_dim: 1,
            seed: 0,
            shared_subsamples: false,
        }
    }
}

/// MTD of the cross-barcode `(sub(core), sub(other))` for `n_pairs` random
/// subsample pairs, in job order. Job `k` draws from its own seeded stream, so
/// the result does not depend on how jobs are scheduled.
pub fn mtd_samples(core: &PointCloud, other: &PointCloud, cfg: &MtdSampling) -> Result<Vec<f64>> {
    let s = cfg.subsample_size;
    for c in [core, other] {
        if s > c.len() {
            return Err(Error::SubsampleTooLarge { size: s, available: c.len() });
        }
    }
    if s == 0 {
        return Err(Error::invalid("subsample size must be >= 1"));
    }
    if cfg.shared_subsamples && core.len() != other.len() {
        return Err(Error::invalid("shared subsamples need clouds of equal size"));
    }
    (0..cfg.n_pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, k as u64));
            let mut left_idx = sample_indices(&mut rng, core.len(), s).into_vec();
            left_idx.sort_unstable();
            let right_idx = if cfg.shared_subsamples {
                left_idx.clone()
            } else {
                let mut r = sample_indices(&mut rng, other.len(), s).into_vec();
                r.sort_unstable();
                r
            };
            let left = core.select(&left_idx)?;
            let right = other.select(&right_idx)?;
            Ok(mtd(&cross_barcode(&left, &right, cfg.hom_dim, MaxScale::Auto)?))
        })
        .collect()
}

/// KDE of [`mtd_samples`].
pub fn mtd_density(core: &PointCloud, other: &PointCloud, cfg: &MtdSampling) -> Result<ScalarDensity> {
    if cfg.n_pairs < 2 {
        return Err(Error::invalid("at least 2 subsample pairs are needed"));
    }
    kde1d(&mtd_samples(core, other, cfg)?, Bandwidth::Auto)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinctionConfig {
    pub n_pairs: usize,
    pub subsample_size: usize,
    pub hom_dim: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for DistinctionConfig {
    fn default() -> Self {
        Self {
            n_pairs: 100,
            subsample_size: 128,
            hom_dim: 1,
            seed: 0,
            threshold: 0.05,
        }
    }
}

impl DistinctionConfig {
    fn sampling(&self, stream: u64) -> MtdSampling {
        MtdSampling {
            n_pairs: self.n_pairs,
            subsample_size: self.subsample_size,
            hom_dim: self.hom_dim,
            seed: derive_seed(self.seed, stream),
            shared_subsamples: false,
        }
    }

    /// Sampling used for the reference density `MTD(core, core)`.
    pub fn self_sampling(&self) -> MtdSampling {
        self.sampling(1)
    }

    /// Sampling used for the candidate density `MTD(core, candidate)`.
    pub fn cross_sampling(&self) -> MtdSampling {
        self.sampling(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Same,
    Different,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinctionReport {
    pub overlap: f64,
    pub threshold: f64,
    pub decision: Decision,
    pub core_samples: Vec<f64>,
    pub candidate_samples: Vec<f64>,
    /// Spread of the samples; descriptive only.
    pub core_std: f64,
    pub candidate_std: f64,
    pub config: DistinctionConfig,
}

impl DistinctionReport {
    pub fn core_density(&self) -> Result<ScalarDensity> {
        kde1d(&self.core_samples, Bandwidth::Auto)
    }

    pub fn candidate_density(&self) -> Result<ScalarDensity> {
        kde1d(&self.candidate_samples, Bandwidth::Auto)
    }
}

/// `Different` iff `overlap < threshold`.
pub fn decide(overlap: f64, threshold: f64) -> Decision {
    if overlap < threshold {
        Decision::Different
    } else {
        Decision::Same
    }
}

/// Compares the density of `MTD(core, candidate)` with the self-density
/// `MTD(core, core)` (independent subsamples on both sides).
pub fn distinguish(core: &PointCloud, candidate: &PointCloud, cfg: &DistinctionConfig) -> Result<DistinctionReport> {
    distinguish_against(core, core, candidate, cfg)
}

/// Like [`distinguish`], with the reference density taken as
/// `MTD(core, reference)`; the noise sweep passes a noised copy of the core.
pub fn distinguish_against(
    core: &PointCloud,
    reference: &PointCloud,
    candidate: &PointCloud,
    cfg: &DistinctionConfig,
) -> Result<DistinctionReport> {
    let core_samples = mtd_samples(core, reference, &cfg.self_sampling())?;
    let candidate_samples = mtd_samples(core, candidate, &cfg.cross_sampling())?;
    report_from_samples(core_samples, candidate_samples, cfg)
}

fn report_from_samples(core_samples: Vec<f64>, candidate_samples: Vec<f64>, cfg: &DistinctionConfig) -> Result<DistinctionReport> {
    let p = kde1d(&core_samples, Bandwidth::Auto)?;
    let q = kde1d(&candidate_samples, Bandwidth::Auto)?;
    let o = overlap(&p, &q);
    Ok(DistinctionReport {
        overlap: o,
        threshold: cfg.threshold,
        decision: decide(o, cfg.threshold),
        core_std: p.std_dev(),
        candidate_std: q.std_dev(),
        core_samples,
        candidate_samples,
        config: cfg.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRegime {
    /// Only the right argument of every MTD is noised.
    RightOnly,
    /// Both arguments are noised (independent noise draws).
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOverlap {
    pub left: usize,
    pub right: usize,
    pub overlap: f64,
    pub self_std: f64,
    pub cross_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub level: f64,
    pub mean_overlap: f64,
    pub pairs: Vec<PairOverlap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub regime: NoiseRegime,
    pub rows: Vec<SweepRow>,
    pub config: DistinctionConfig,
}

/// Relative noise levels swept by default.
pub const DEFAULT_NOISE_LEVELS: [f64; 4] = [0.0, 0.25, 0.5, 0.75];

/// Mean overlap between self-densities and inter-class cross-densities at each
/// noise level. For every ordered pair `(i, j)`, `i != j`, the self-density is
/// `MTD(L_i, R_i)` and the cross-density `MTD(L_i, R_j)`, where `L` and `R` are
/// the left/right versions of the clouds under the regime.
pub fn noise_sensitivity_sweep(
    clouds: &[PointCloud],
    levels: &[f64],
    regime: NoiseRegime,
    cfg: &DistinctionConfig,
) -> Result<SweepTable> {
    if clouds.len() < 2 {
        return Err(Error::invalid("the sweep needs at least 2 clouds"));
    }
    if levels.is_empty() {
        return Err(Error::Empty("noise levels"));
    }
    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let noised = |c: usize, side: u64| -> Result<PointCloud> {
            let s = derive_seed(derive_seed(cfg.seed, 1000 + c as u64), side ^ level.to_bits());
            inject_noise(&clouds[c], level, s)
        };
        let right: Vec<PointCloud> = (0..clouds.len()).map(|c| noised(c, 1)).collect::<Result<_>>()?;
        let left: Vec<PointCloud> = match regime {
            NoiseRegime::RightOnly => clouds.to_vec(),
            NoiseRegime::Both => (0..clouds.len()).map(|c| noised(c, 2)).collect::<Result<_>>()?,
        };
        let self_samples: Vec<Vec<f64>> = (0..clouds.len())
            .map(|i| mtd_samples(&left[i], &right[i], &cfg.self_sampling()))
            .collect::<Result<_>>()?;
        let mut pairs = Vec::new();
        for i in 0..clouds.len() {
            for j in 0..clouds.len() {
                if i == j {
                    continue;
                }
                let cross = mtd_samples(&left[i], &right[j], &cfg.cross_sampling())?;
                let r = report_from_samples(self_samples[i].clone(), cross, cfg)?;
                pairs.push(PairOverlap {
                    left: i,
                    right: j,
                    overlap: r.overlap,
                    self_std: r.core_std,
                    cross_std: r.candidate_std,
                });
            }
        }
        let mean_overlap = pairs.iter().map(|p| p.overlap).sum::<f64>() / pairs.len() as f64;
        rows.push(SweepRow { level, mean_overlap, pairs });
    }
    Ok(SweepTable { regime, rows, config: cfg.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest excess over the bound (negative when every trial is inside it).
    pub max_violation: f64,
    pub passed: bool,
}

/// Slack allowed on top of the Lipschitz bound.
pub const LIPSCHITZ_SLACK: f64 = 1e-6;

fn random_mixture(rng: &mut crate::rng::Rng, z: &[f64]) -> Vec<f64> {
    let k = rng.random_range(1..=3);
    let comps: Vec<(f64, f64, f64)> = (0..k)
        .map(|_| (rng.random_range(-3.0..3.0), rng.random_range(0.3..1.5), rng.random_range(0.2..1.0)))
        .collect();
    let wsum: f64 = comps.iter().map(|c| c.2).sum();
    z.iter()
        .map(|&x| {
            comps
                .iter()
                .map(|&(m, s, w)| w / wsum * (-0.5 * ((x - m) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt()))
                .sum()
        })
        .collect()
}

/// Randomized check of `|O(p,q) - O(p̂,q̂)| <= |p - p̂|_1 + |q - q̂|_1` on
/// Gaussian mixtures; every tenth trial perturbs by a tiny shift.
pub fn overlap_lipschitz_check(trials: usize, seed: u64) -> PropertyReport {
    let z = linspace(-8.0, 8.0, 1024);
    let mut rng = rng_from_seed(seed);
    let mut violations = 0;
    let mut max_violation = f64::NEG_INFINITY;
    for t in 0..trials {
        let p = random_mixture(&mut rng, &z);
        let q = random_mixture(&mut rng, &z);
        let (ph, qh) = if t % 10 == 9 {
            let shift = rng.random_range(1..4);
            let shifted = |f: &[f64]| -> Vec<f64> { (0..f.len()).map(|k| if k >= shift { f[k - shift] } else { 0.0 }).collect() };
            (p.clone(), shifted(&q))
        } else {
            let mix = |f: &[f64], rng: &mut crate::rng::Rng| {
                let lam: f64 = rng.random_range(0.0..0.5);
                let r = random_mixture(rng, &z);
                f.iter().zip(&r).map(|(a, b)| (1.0 - lam) * a + lam * b).collect::<Vec<f64>>()
            };
            (mix(&p, &mut rng), mix(&q, &mut rng))
        };
        let l1 = |a: &[f64], b: &[f64]| {
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
            trapezoid(&z, &d)
        };
        let bound = l1(&p, &ph) + l1(&q, &qh);
        let diff = (overlap_on_grid(&z, &p, &q) - overlap_on_grid(&z, &ph, &qh)).abs();
        let excess = diff - bound;
        max_violation = max_violation.max(excess);
        if excess > LIPSCHITZ_SLACK {
            violations += 1;
        }
    }
    PropertyReport { trials, violations, max_violation, passed: violations == 0 }
}

/// Total variation distance between two weightings of the same atoms.
fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Pushes a distribution over atoms forward through `f`, merging atoms with
/// equal images. Returns weights aligned on the union of images.
fn pushforward(values: &[f64], mu: &[f64], nu: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut keys: Vec<f64> = values.to_vec();
    keys.sort_by(f64::total_cmp);
    keys.dedup();
    let mut a = vec![0.0; keys.len()];
    let mut b = vec![0.0; keys.len()];
    for (k, v) in values.iter().enumerate() {
        let slot = keys.binary_search_by(|x| x.total_cmp(v)).expect("present");
        a[slot] += mu[k];
        b[slot] += nu[k];
    }
    (a, b)
}

/// Checks that the MTD pushforward never increases total variation, on random
/// distributions over at most six random diagrams (some sharing MTD values).
pub fn tv_pushforward_check(trials: usize, seed: u64) -> PropertyReport {
    let mut rng = rng_from_seed(seed);
    let mut violations = 0;
    let mut max_violation = f64::NEG_INFINITY;
    for _ in 0..trials {
        let atoms = rng.random_range(1..=6);
        let diagrams: Vec<PersistenceDiagram> = (0..atoms)
            .map(|_| {
                let pairs = (0..rng.random_range(0..4))
                    .map(|_| {
                        let b = (rng.random_range(0..4) as f64) * 0.25;
                        PersistencePair::new(b, b + (rng.random_range(1..4) as f64) * 0.25)
                    })
                    .collect();
                PersistenceDiagram::new(1, pairs)
            })
            .collect();
        let weights = |rng: &mut crate::rng::Rng| {
            let w: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.0..1.0)).collect();
            let s: f64 = w.iter().sum::<f64>().max(f64::MIN_POSITIVE);
            w.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let (mu, nu) = (weights(&mut rng), weights(&mut rng));
        let values: Vec<f64> = diagrams.iter().map(mtd).collect();
        let (pa, pb) = pushforward(&values, &mu, &nu);
        let excess = total_variation(&pa, &pb) - total_variation(&mu, &nu);
        max_violation = max_violation.max(excess);
        if excess > 1e-12 {
            violations += 1;
        }
    }
    PropertyReport { trials, violations, max_violation, passed: violations == 0 }
}
