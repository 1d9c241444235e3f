//! Topological features for time series and a small logistic classifier.
//!
//! A series is delay-embedded, reduced by PCA, and compared with one embedded
//! reference series per class through cross-barcodes in both orientations.
//! Each comparison contributes the MTD and the persistence entropy.

use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{pca_reduce, time_delay_embedding, PointCloud, TimeSeries};
use crate::persistence::{cross_barcode, MaxScale};
use crate::rng::rng_from_seed;
use crate::summaries::{mtd, persistence_entropy};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopGenConfig {
    pub embedding_dim: usize,
    pub delay: usize,
    pub pca_dim: usize,
    pub hom_dims: Vec<usize>,
}

impl Default for TopGenConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 200,
            delay: 1,
            pca_dim: 3,
            hom_dims: vec![1],
        }
    }
}

impl TopGenConfig {
    fn validate(&self) -> Result<()> {
        if self.pca_dim == 0 || self.pca_dim > self.embedding_dim {
            return Err(Error::invalid(format!(
                "need 1 <= pca_dim <= embedding_dim, got {} and {}",
                self.pca_dim, self.embedding_dim
            )));
        }
        if self.hom_dims.is_empty() || self.hom_dims.iter().any(|&d| d > 1) {
            return Err(Error::invalid("hom_dims must be a nonempty subset of {0, 1}"));
        }
        Ok(())
    }
}

/// Delay embedding followed by PCA.
pub fn embed(series: &TimeSeries, cfg: &TopGenConfig) -> Result<PointCloud> {
    pca_reduce(&time_delay_embedding(series, cfg.embedding_dim, cfg.delay)?, cfg.pca_dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    Mtd,
    Entropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema: Vec<String>,
}

/// Embedded references and the feature layout they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct TopGen {
    config: TopGenConfig,
    references: Vec<PointCloud>,
}

impl TopGen {
    pub fn new(config: TopGenConfig, references: &[TimeSeries]) -> Result<Self> {
        config.validate()?;
        if references.is_empty() {
            return Err(Error::Empty("references"));
        }
        let references = references.iter().map(|r| embed(r, &config)).collect::<Result<_>>()?;
        Ok(Self { config, references })
    }

    pub fn config(&self) -> &TopGenConfig {
        &self.config
    }

    /// Feature order: reference, homology dimension, orientation (series on
    /// the left, then on the right), statistic.
    pub fn layout(&self) -> Vec<(usize, usize, bool, Stat)> {
        let mut v = Vec::new();
        for r in 0..self.references.len() {
            for &d in &self.config.hom_dims {
                for left in [true, false] {
                    for s in [Stat::Mtd, Stat::Entropy] {
                        v.push((r, d, left, s));
                    }
                }
            }
        }
        v
    }

    pub fn schema(&self) -> Vec<String> {
        self.layout()
            .into_iter()
            .map(|(r, d, left, s)| {
                let stat = match s {
                    Stat::Mtd => "mtd",
                    Stat::Entropy => "entropy",
                };
                let side = if left { "left" } else { "right" };
                format!("{stat}_h{d}_{side}_ref{r}")
            })
            .collect()
    }

    pub fn features(&self, series: &TimeSeries) -> Result<FeatureVector> {
        let cloud = embed(series, &self.config)?;
        let mut values = Vec::with_capacity(4 * self.references.len() * self.config.hom_dims.len());
        for reference in &self.references {
            for &d in &self.config.hom_dims {
                for (l, r) in [(&cloud, reference), (reference, &cloud)] {
                    let dg = cross_barcode(l, r, d, MaxScale::Auto)?;
                    values.push(mtd(&dg));
                    values.push(persistence_entropy(&dg));
                }
            }
        }
        Ok(FeatureVector { values, schema: self.schema() })
    }

    /// Features of many series, computed concurrently, in input order.
    pub fn features_batch(&self, series: &[TimeSeries]) -> Result<Vec<FeatureVector>> {
        series.par_iter().map(|s| self.features(s)).collect()
    }
}

pub fn topgen_features(series: &TimeSeries, cfg: &TopGenConfig, references: &[TimeSeries]) -> Result<FeatureVector> {
    TopGen::new(cfg.clone(), references)?.features(series)
}

/// One random index per class, ordered by class label.
pub fn select_references(labels: &[usize], seed: u64) -> Vec<usize> {
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut rng = rng_from_seed(seed);
    classes
        .iter()
        .map(|&c| {
            let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            *members.choose(&mut rng).expect("class present")
        })
        .collect()
}

/// Columns of `features` whose schema names satisfy `keep`.
pub fn select_columns(features: &[FeatureVector], keep: impl Fn(&str) -> bool) -> Vec<Vec<f64>> {
    features
        .iter()
        .map(|f| f.values.iter().zip(&f.schema).filter(|(_, n)| keep(n)).map(|(v, _)| *v).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub l2: f64,
    pub learning_rate: f64,
    pub iterations: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            learning_rate: 0.5,
            iterations: 2000,
        }
    }
}

/// Logistic regression on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Full-batch gradient descent on mean cross-entropy plus `l2/2 * |w|^2`,
/// starting from zero; deterministic. The bias is not penalized.
pub fn logistic_fit(x: &[Vec<f64>], y: &[bool], cfg: &LogisticConfig) -> Result<LogisticModel> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::invalid("need at least 2 labelled samples"));
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(Error::invalid("training labels contain a single class"));
    }
    let d = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: r.len() });
    }
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let s = (x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n as f64).sqrt();
            if s > 0.0 { s } else { 1.0 }
        })
        .collect();
    let z: Vec<Vec<f64>> = x.iter().map(|r| (0..d).map(|j| (r[j] - mean[j]) / scale[j]).collect()).collect();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..cfg.iterations {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (zi, &yi) in z.iter().zip(y) {
            let p = sigmoid(b + zi.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>());
            let e = p - if yi { 1.0 } else { 0.0 };
            gw.iter_mut().zip(zi).for_each(|(g, v)| *g += e * v);
            gb += e;
        }
        for j in 0..d {
            // implicit step on the penalty keeps large l2 stable
            w[j] = (w[j] - cfg.learning_rate * gw[j] / n as f64) / (1.0 + cfg.learning_rate * cfg.l2);
        }
        b -= cfg.learning_rate * gb / n as f64;
    }
    Ok(LogisticModel { mean, scale, weights: w, bias: b })
}

impl LogisticModel {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let z: f64 = x
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .zip(&self.weights)
            .map(|(((v, m), s), w)| (v - m) / s * w)
            .sum();
        sigmoid(self.bias + z)
    }
}

pub fn logistic_predict(model: &LogisticModel, x: &[f64]) -> f64 {
    model.predict_proba(x)
}

/// ROC-AUC via the Mann-Whitney rank statistic with tied scores sharing the
/// mean rank. Doubled ranks keep the numerator an exact integer.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("AUC needs both classes"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum2 = 0u64; // sum over positives of 2 * rank
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        // ranks i+1..=j share (i+1+j)/2, doubled
        let twice = (i + 1 + j) as u64;
        rank_sum2 += twice * idx[i..j].iter().filter(|&&k| labels[k]).count() as u64;
        i = j;
    }
    let u2 = rank_sum2 - pos * (pos + 1);
    Ok(u2 as f64 / (2 * pos * neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub roc_auc: f64,
}

/// Accuracy at threshold 0.5 and rank-statistic ROC-AUC.
pub fn evaluate(model: &LogisticModel, x: &[Vec<f64>], y: &[bool]) -> Result<Metrics> {
    let scores: Vec<f64> = x.iter().map(|r| model.predict_proba(r)).collect();
    metrics_from_scores(&scores, y)
}

pub fn metrics_from_scores(scores: &[f64], y: &[bool]) -> Result<Metrics> {
    let correct = scores.iter().zip(y).filter(|(s, &l)| (**s >= 0.5) == l).count();
    Ok(Metrics {
        accuracy: correct as f64 / y.len().max(1) as f64,
        roc_auc: roc_auc(scores, y)?,
    })
}

/// One-vs-rest logistic models, one per class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsRest {
    pub classes: Vec<usize>,
    pub models: Vec<LogisticModel>,
}

impl OneVsRest {
    pub fn fit(x: &[Vec<f64>], labels: &[usize], cfg: &LogisticConfig) -> Result<Self> {
        let mut classes = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::invalid("need at least 2 classes"));
        }
        let models = classes
            .iter()
            .map(|&c| {
                let y: Vec<bool> = labels.iter().map(|&l| l == c).collect();
                logistic_fit(x, &y, cfg)
            })
            .collect::<Result<_>>()?;
        Ok(Self { classes, models })
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_p = f64::NEG_INFINITY;
        for (k, m) in self.models.iter().enumerate() {
            let p = m.predict_proba(x);
            if p > best_p {
                best_p = p;
                best = k;
            }
        }
        self.classes[best]
    }

    pub fn accuracy(&self, x: &[Vec<f64>], labels: &[usize]) -> f64 {
        let correct = x.iter().zip(labels).filter(|(r, &l)| self.predict(r) == l).count();
        correct as f64 / labels.len().max(1) as f64
    }
}
