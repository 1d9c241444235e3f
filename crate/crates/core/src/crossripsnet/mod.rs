//! Cross-RipsNet: permutation-invariant prediction of cross-persistence
//! densities from a pair of point clouds.
//!
//! Every encoder is a DeepSets block `phi2(sum_x phi1(x))`. Variant `a` encodes
//! the merged cloud only, `b` adds separate encoders for the left and right
//! clouds, and `c` adds one more over per-point rows of the cross distance
//! matrix. A dense head maps the concatenated features to one logit per grid
//! cell, and a softmax turns those into a distribution on the grid.

pub mod features;
pub mod mlp;
pub mod task;

use rand::seq::{IndexedRandom, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use features::{distance_features, DistanceReducer, ReducerMethod};
pub use mlp::{Mlp, MlpCache};

use crate::geometry::{cross_distance_matrix, lex_cmp, CrossDistanceMatrix, PointCloud};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::stats::{kde1d, mtd_samples, Bandwidth, MtdSampling};
use crate::summaries::{DensityGrid, GridSpec};
use crate::{Error, Result};

/// Smoothing added to both distributions before taking KL.
pub const KL_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    AMerged,
    BDual,
    CDualWithDistance,
}

/// Hidden and output widths of the blocks; input widths follow from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub phi1: Vec<usize>,
    pub phi2: Vec<usize>,
    pub head_hidden: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            phi1: vec![64, 128],
            phi2: vec![64],
            head_hidden: vec![256],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub point_dim: usize,
    pub grid: GridSpec,
    #[serde(default)]
    pub architecture: Architecture,
    pub reducer: ReducerMethod,
    pub k: usize,
    /// `false` drops the right-cloud encoder (variants b and c only).
    pub right_encoder: bool,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(variant: Variant, point_dim: usize, grid: GridSpec) -> Self {
        Self {
            variant,
            point_dim,
            grid,
            architecture: Architecture::default(),
            reducer: ReducerMethod::Quantiles,
            k: 60,
            right_encoder: true,
            seed: 0,
        }
    }
}

/// DeepSets block `phi2(sum_x phi1(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepSets {
    pub phi1: Mlp,
    pub phi2: Mlp,
}

struct DeepSetsCache {
    phi1: Vec<MlpCache>,
    phi2: MlpCache,
}

/// Rows in lexicographic order, so the pooled sum is accumulated in an order
/// that does not depend on how the input was listed.
fn canonical_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Vec<&'a [f64]> {
    let mut v: Vec<&[f64]> = rows.into_iter().collect();
    v.sort_by(|a, b| lex_cmp(a, b));
    v
}

impl DeepSets {
    fn new(input_dim: usize, arch: &Architecture, rng: &mut Rng) -> Result<Self> {
        let mut s1 = vec![input_dim];
        s1.extend(&arch.phi1);
        let mut s2 = vec![*s1.last().expect("nonempty")];
        s2.extend(&arch.phi2);
        Ok(Self {
            phi1: Mlp::new(s1, true, rng)?,
            phi2: Mlp::new(s2, true, rng)?,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.phi2.output_dim()
    }

    fn check(&self, rows: &[&[f64]]) -> Result<()> {
        if rows.is_empty() {
            return Err(Error::Empty("encoder input"));
        }
        match rows.iter().find(|r| r.len() != self.phi1.input_dim()) {
            Some(r) => Err(Error::DimensionMismatch { expected: self.phi1.input_dim(), got: r.len() }),
            None => Ok(()),
        }
    }

    /// The pooled sum `sum_x phi1(x)`.
    pub fn pool(&self, rows: &[&[f64]]) -> Result<Vec<f64>> {
        self.check(rows)?;
        let mut sum = vec![0.0; self.phi1.output_dim()];
        for r in canonical_rows(rows.iter().copied()) {
            sum.iter_mut().zip(self.phi1.forward(r)).for_each(|(s, v)| *s += v);
        }
        Ok(sum)
    }

    pub fn encode(&self, rows: &[&[f64]]) -> Result<Vec<f64>> {
        Ok(self.phi2.forward(&self.pool(rows)?))
    }

    fn encode_cached(&self, rows: &[&[f64]]) -> (Vec<f64>, DeepSetsCache) {
        let mut sum = vec![0.0; self.phi1.output_dim()];
        let mut caches = Vec::with_capacity(rows.len());
        for r in canonical_rows(rows.iter().copied()) {
            let (out, c) = self.phi1.forward_cached(r);
            sum.iter_mut().zip(out).for_each(|(s, v)| *s += v);
            caches.push(c);
        }
        let (out, c2) = self.phi2.forward_cached(&sum);
        (out, DeepSetsCache { phi1: caches, phi2: c2 })
    }

    fn encode_pattern(&self, rows: &[&[f64]], pattern: &mut Vec<bool>) -> Vec<f64> {
        let mut sum = vec![0.0; self.phi1.output_dim()];
        for r in canonical_rows(rows.iter().copied()) {
            sum.iter_mut().zip(self.phi1.activation_pattern(r, pattern)).for_each(|(s, v)| *s += v);
        }
        self.phi2.activation_pattern(&sum, pattern)
    }

    fn backward(&self, cache: &DeepSetsCache, grad_out: &[f64], g1: &mut [f64], g2: &mut [f64]) {
        let g_sum = self.phi2.backward(&cache.phi2, grad_out, g2);
        for c in &cache.phi1 {
            self.phi1.backward(c, &g_sum, g1);
        }
    }
}

/// `phi2(sum_x phi1(x))` over the points of `cloud`.
pub fn deepsets_encode(cloud: &PointCloud, phi1: &Mlp, phi2: &Mlp) -> Result<Vec<f64>> {
    if phi1.output_dim() != phi2.input_dim() {
        return Err(Error::DimensionMismatch { expected: phi1.output_dim(), got: phi2.input_dim() });
    }
    let block = DeepSets { phi1: phi1.clone(), phi2: phi2.clone() };
    let rows: Vec<&[f64]> = cloud.points().collect();
    block.encode(&rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Input {
    Combined,
    Left,
    Right,
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrnModel {
    pub config: ModelConfig,
    combined: DeepSets,
    left: Option<DeepSets>,
    right: Option<DeepSets>,
    distance: Option<DeepSets>,
    head: Mlp,
    reducer: Option<DistanceReducer>,
}

/// Model inputs after canonical ordering and distance-feature extraction.
pub struct Prepared {
    left: PointCloud,
    right: PointCloud,
    distance: Option<Vec<Vec<f64>>>,
}

impl Prepared {
    fn rows(&self, input: Input) -> Vec<&[f64]> {
        match input {
            Input::Combined => self.left.points().chain(self.right.points()).collect(),
            Input::Left => self.left.points().collect(),
            Input::Right => self.right.points().collect(),
            Input::Distance => self.distance.as_ref().expect("distance rows").iter().map(|r| r.as_slice()).collect(),
        }
    }
}

/// Gradients, one flat vector per network in [`CrnModel::networks`] order.
pub type Gradients = Vec<Vec<f64>>;

fn canonical(cloud: &PointCloud) -> Result<PointCloud> {
    cloud.select(&cloud.canonical_order())
}

impl CrnModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        if config.point_dim == 0 {
            return Err(Error::invalid("point dimension must be >= 1"));
        }
        if !config.right_encoder && config.variant == Variant::AMerged {
            return Err(Error::invalid("the right-encoder ablation applies to variants b and c"));
        }
        let mut rng = rng_from_seed(config.seed);
        let arch = &config.architecture;
        let combined = DeepSets::new(config.point_dim, arch, &mut rng)?;
        let dual = config.variant != Variant::AMerged;
        let left = if dual { Some(DeepSets::new(config.point_dim, arch, &mut rng)?) } else { None };
        let right = if dual && config.right_encoder { Some(DeepSets::new(config.point_dim, arch, &mut rng)?) } else { None };
        let (distance, reducer) = if config.variant == Variant::CDualWithDistance {
            (Some(DeepSets::new(config.k, arch, &mut rng)?), Some(DistanceReducer::new(config.reducer, config.k)?))
        } else {
            (None, None)
        };
        let feat = [Some(&combined), left.as_ref(), right.as_ref(), distance.as_ref()]
            .iter()
            .flatten()
            .map(|b| b.output_dim())
            .sum::<usize>();
        let mut sizes = vec![feat];
        sizes.extend(&arch.head_hidden);
        sizes.push(config.grid.cells());
        let head = Mlp::new(sizes, false, &mut rng)?;
        Ok(Self { config, combined, left, right, distance, head, reducer })
    }

    fn encoders(&self) -> Vec<(Input, &DeepSets)> {
        let mut v = vec![(Input::Combined, &self.combined)];
        if let Some(b) = &self.left {
            v.push((Input::Left, b));
        }
        if let Some(b) = &self.right {
            v.push((Input::Right, b));
        }
        if let Some(b) = &self.distance {
            v.push((Input::Distance, b));
        }
        v
    }

    /// All networks in a fixed order: each encoder's `phi1`, `phi2`, then the head.
    pub fn networks(&self) -> Vec<&Mlp> {
        let mut v: Vec<&Mlp> = self.encoders().into_iter().flat_map(|(_, b)| [&b.phi1, &b.phi2]).collect();
        v.push(&self.head);
        v
    }

    pub fn networks_mut(&mut self) -> Vec<&mut Mlp> {
        let mut v: Vec<&mut Mlp> = Vec::new();
        for b in [Some(&mut self.combined), self.left.as_mut(), self.right.as_mut(), self.distance.as_mut()]
            .into_iter()
            .flatten()
        {
            v.push(&mut b.phi1);
            v.push(&mut b.phi2);
        }
        v.push(&mut self.head);
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.networks().iter().map(|m| m.params().len()).sum()
    }

    pub fn grid(&self) -> GridSpec {
        self.config.grid
    }

    pub fn reducer(&self) -> Option<&DistanceReducer> {
        self.reducer.as_ref()
    }

    /// Fits the PCA distance reducer on training pairs (no-op otherwise).
    pub fn fit_reducer(&mut self, pairs: &[(&PointCloud, &PointCloud)]) -> Result<()> {
        let Some(r) = self.reducer.as_mut() else { return Ok(()) };
        if r.method != ReducerMethod::Pca {
            return Ok(());
        }
        let mats: Vec<CrossDistanceMatrix> = pairs
            .iter()
            .map(|(l, r)| cross_distance_matrix(&canonical(l)?, &canonical(r)?))
            .collect::<Result<_>>()?;
        r.fit(mats.iter())
    }

    pub fn prepare(&self, left: &PointCloud, right: &PointCloud) -> Result<Prepared> {
        for c in [left, right] {
            if c.dim() != self.config.point_dim {
                return Err(Error::DimensionMismatch { expected: self.config.point_dim, got: c.dim() });
            }
        }
        let left = canonical(left)?;
        let right = canonical(right)?;
        let distance = match &self.reducer {
            Some(r) => Some(r.transform(&cross_distance_matrix(&left, &right)?)?),
            None => None,
        };
        Ok(Prepared { left, right, distance })
    }

    fn features(&self, prep: &Prepared) -> Result<Vec<f64>> {
        let mut f = Vec::new();
        for (input, block) in self.encoders() {
            f.extend(block.encode(&prep.rows(input))?);
        }
        Ok(f)
    }

    pub fn forward_prepared(&self, prep: &Prepared) -> Result<Vec<f64>> {
        Ok(softmax(&self.head.forward(&self.features(prep)?)))
    }

    /// Predicted distribution on the model grid.
    pub fn forward(&self, left: &PointCloud, right: &PointCloud) -> Result<DensityGrid> {
        let p = self.forward_prepared(&self.prepare(left, right)?)?;
        Ok(DensityGrid { spec: self.config.grid, values: p, normalized: true })
    }

    fn activation_pattern(&self, prep: &Prepared) -> Vec<bool> {
        let mut pattern = Vec::new();
        let mut f = Vec::new();
        for (input, block) in self.encoders() {
            f.extend(block.encode_pattern(&prep.rows(input), &mut pattern));
        }
        self.head.activation_pattern(&f, &mut pattern);
        pattern
    }

    /// `KL(target || prediction)` and its gradient for every parameter.
    pub fn loss_and_gradients(&self, prep: &Prepared, target: &[f64]) -> Result<(f64, Gradients)> {
        let mut feats = Vec::new();
        let mut caches = Vec::new();
        let encoders = self.encoders();
        for (input, block) in &encoders {
            let rows = prep.rows(*input);
            block.check(&rows)?;
            let (out, c) = block.encode_cached(&rows);
            feats.extend(out);
            caches.push(c);
        }
        let (logits, head_cache) = self.head.forward_cached(&feats);
        let q = softmax(&logits);
        let (loss, g_q) = kl_and_grad(target, &q);
        let s: f64 = q.iter().zip(&g_q).map(|(a, b)| a * b).sum();
        let g_logits: Vec<f64> = q.iter().zip(&g_q).map(|(qk, gk)| qk * (gk - s)).collect();

        let mut grads: Gradients = self.networks().iter().map(|m| vec![0.0; m.params().len()]).collect();
        let (enc_grads, head_grad) = grads.split_at_mut(2 * encoders.len());
        let g_feat = self.head.backward(&head_cache, &g_logits, &mut head_grad[0]);
        let mut off = 0;
        for (e, ((_, block), cache)) in encoders.iter().zip(&caches).enumerate() {
            let d = block.output_dim();
            let (g1, g2) = enc_grads[2 * e..2 * e + 2].split_at_mut(1);
            block.backward(cache, &g_feat[off..off + d], &mut g1[0], &mut g2[0]);
            off += d;
        }
        Ok((loss, grads))
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn smooth(p: &[f64]) -> Vec<f64> {
    let s: f64 = p.iter().map(|v| v + KL_EPSILON).sum();
    p.iter().map(|v| (v + KL_EPSILON) / s).collect()
}

fn kl_raw(p: &[f64], q: &[f64]) -> f64 {
    let (ps, qs) = (smooth(p), smooth(q));
    ps.iter().zip(&qs).map(|(a, b)| a * (a / b).ln()).sum()
}

/// Loss and its gradient with respect to the unsmoothed prediction `q`.
fn kl_and_grad(target: &[f64], q: &[f64]) -> (f64, Vec<f64>) {
    let ps = smooth(target);
    let s: f64 = q.iter().map(|v| v + KL_EPSILON).sum();
    let loss = kl_raw(target, q);
    let grad = q.iter().zip(&ps).map(|(qj, pj)| -pj / (qj + KL_EPSILON) + 1.0 / s).collect();
    (loss, grad)
}

fn check_shapes(a: &DensityGrid, b: &DensityGrid) -> Result<()> {
    a.check_same_shape(b)
}

/// `KL(target || pred)` with both grids smoothed by [`KL_EPSILON`] and renormalized.
pub fn kl_loss(pred: &DensityGrid, target: &DensityGrid) -> Result<f64> {
    check_shapes(pred, target)?;
    Ok(kl_raw(&target.values, &pred.values))
}

pub fn sym_kl(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    check_shapes(p, q)?;
    Ok(kl_raw(&p.values, &q.values) + kl_raw(&q.values, &p.values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSample {
    pub left: PointCloud,
    pub right: PointCloud,
    pub target: DensityGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 16,
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trained {
    pub model: CrnModel,
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
}

struct Adam {
    m: Gradients,
    v: Gradients,
    t: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn validate_targets(model: &CrnModel, data: &[TrainSample]) -> Result<()> {
    for (i, s) in data.iter().enumerate() {
        if s.target.spec.nx != model.config.grid.nx || s.target.spec.ny != model.config.grid.ny {
            return Err(Error::ShapeMismatch(format!("target {i} does not match the model grid")));
        }
        if (s.target.sum() - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("target {i} is not normalized")));
        }
    }
    Ok(())
}

/// Minibatch training on `KL(target || prediction)`. Per-sample gradients may
/// be computed concurrently; they are summed in batch order.
pub fn train(mut model: CrnModel, data: &[TrainSample], cfg: &TrainingConfig) -> Result<Trained> {
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if !(cfg.learning_rate >= 0.0) || cfg.batch_size == 0 {
        return Err(Error::invalid("learning rate must be >= 0 and batch size >= 1"));
    }
    validate_targets(&model, data)?;
    if model.reducer.as_ref().is_some_and(|r| !r.is_fitted()) {
        let pairs: Vec<(&PointCloud, &PointCloud)> = data.iter().map(|s| (&s.left, &s.right)).collect();
        model.fit_reducer(&pairs)?;
    }
    let prepared: Vec<Prepared> = data.iter().map(|s| model.prepare(&s.left, &s.right)).collect::<Result<_>>()?;
    let zeros: Gradients = model.networks().iter().map(|m| vec![0.0; m.params().len()]).collect();
    let mut adam = Adam { m: zeros.clone(), v: zeros, t: 0 };
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 0x5eed));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, Gradients)> = batch
                .par_iter()
                .map(|&i| model.loss_and_gradients(&prepared[i], &data[i].target.values))
                .collect::<Result<_>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut grads: Gradients = model.networks().iter().map(|m| vec![0.0; m.params().len()]).collect();
            for (loss, g) in &results {
                epoch_loss += loss;
                for (acc, gi) in grads.iter_mut().zip(g) {
                    acc.iter_mut().zip(gi).for_each(|(a, b)| *a += b * scale);
                }
            }
            step(&mut model, &grads, &mut adam, cfg);
        }
        history.push(epoch_loss / data.len() as f64);
    }
    Ok(Trained { model, loss_history: history })
}

fn step(model: &mut CrnModel, grads: &Gradients, adam: &mut Adam, cfg: &TrainingConfig) {
    let lr = cfg.learning_rate;
    adam.t += 1;
    let (b1t, b2t) = (1.0 - ADAM_BETA1.powi(adam.t), 1.0 - ADAM_BETA2.powi(adam.t));
    for (k, net) in model.networks_mut().into_iter().enumerate() {
        let p = net.params_mut();
        match cfg.optimizer {
            Optimizer::Sgd => p.iter_mut().zip(&grads[k]).for_each(|(w, g)| *w -= lr * g),
            Optimizer::Adam => {
                for (j, w) in p.iter_mut().enumerate() {
                    let g = grads[k][j];
                    let m = &mut adam.m[k][j];
                    let v = &mut adam.v[k][j];
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *w -= lr * (*m / b1t) / ((*v / b2t).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Mean symmetric KL between predictions and targets.
pub fn mean_sym_kl(model: &CrnModel, data: &[TrainSample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let total: f64 = data
        .par_iter()
        .map(|s| sym_kl(&model.forward(&s.left, &s.right)?, &s.target))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    Ok(total / data.len() as f64)
}

/// Shuffled index split; `train_fraction` of the items (rounded) go to training.
pub fn train_test_split(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let cut = ((n as f64) * train_fraction).round() as usize;
    let test = idx.split_off(cut.min(n));
    (idx, test)
}

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    /// Number of parameters sampled.
    pub samples: usize,
    pub step: f64,
    pub seed: u64,
    /// Sample only head parameters.
    pub head_only: bool,
    pub tolerance: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            samples: 200,
            step: 1e-5,
            seed: 0,
            head_only: false,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameters skipped because a step of `±step` flips some ReLU.
    pub skipped_kinks: usize,
    pub passed: bool,
}

/// Gradients below this magnitude are compared absolutely.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Compares analytic gradients with central differences on a random subset
/// of parameters, skipping any whose perturbation changes an activation sign.
pub fn grad_check(model: &CrnModel, sample: &TrainSample, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    if !(cfg.tolerance > 0.0) || !(cfg.step > 0.0) {
        return Err(Error::invalid("tolerance and step must be > 0"));
    }
    let prep = model.prepare(&sample.left, &sample.right)?;
    let target = &sample.target.values;
    let (_, grads) = model.loss_and_gradients(&prep, target)?;
    let base_pattern = model.activation_pattern(&prep);
    let nets = model.networks().len();
    let candidates: Vec<(usize, usize)> = model
        .networks()
        .iter()
        .enumerate()
        .filter(|(k, _)| !cfg.head_only || *k == nets - 1)
        .flat_map(|(k, m)| (0..m.params().len()).map(move |j| (k, j)))
        .collect();
    let mut rng = rng_from_seed(cfg.seed);
    let picked: Vec<(usize, usize)> = candidates.choose_multiple(&mut rng, cfg.samples.min(candidates.len())).copied().collect();

    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut skipped = 0;
    for (k, j) in picked {
        let eval = |delta: f64| -> Result<(f64, Vec<bool>)> {
            let mut m = model.clone();
            m.networks_mut()[k].params_mut()[j] += delta;
            let p = m.forward_prepared(&prep)?;
            Ok((kl_raw(target, &p), m.activation_pattern(&prep)))
        };
        let (lp, pp) = eval(cfg.step)?;
        let (lm, pm) = eval(-cfg.step)?;
        if pp != base_pattern || pm != base_pattern {
            skipped += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * cfg.step);
        let analytic = grads[k][j];
        let rel = (numeric - analytic).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max(rel);
        checked += 1;
    }
    Ok(GradCheckReport {
        max_relative_error: worst,
        checked,
        skipped_kinks: skipped,
        passed: worst < cfg.tolerance,
    })
}

/// KDE of MTD samples evaluated at the cell centers of a 1-D grid, normalized.
pub fn mtd_density_target(core: &PointCloud, other: &PointCloud, sampling: &MtdSampling, grid: GridSpec) -> Result<DensityGrid> {
    density_on_line(&mtd_samples(core, other, sampling)?, grid)
}

/// Rasterizes the KDE of `samples` on a one-row grid and normalizes it.
pub fn density_on_line(samples: &[f64], grid: GridSpec) -> Result<DensityGrid> {
    if grid.ny != 1 {
        return Err(Error::invalid("MTD densities live on one-row grids"));
    }
    let kde = kde1d(samples, Bandwidth::Auto)?;
    let values = (0..grid.nx).map(|i| kde.evaluate(grid.x_center(i))).collect();
    let mut g = DensityGrid::from_values(grid, values)?;
    g.normalize()?;
    Ok(g)
}

/// Forward pass of a model trained on one-row MTD-density grids.
pub fn predict_mtd_density(model: &CrnModel, left: &PointCloud, right: &PointCloud) -> Result<DensityGrid> {
    if model.config.grid.ny != 1 {
        return Err(Error::invalid("model was not trained on MTD-density grids"));
    }
    model.forward(left, right)
}
