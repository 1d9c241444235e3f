//! Persistence diagrams from filtrations.
//!
//! [`reduce`] runs the standard column algorithm over Z/2 on an explicit
//! [`Filtration`], with the clearing (twist) optimization: columns are reduced
//! from the top dimension down, and a simplex already known to be a pivot is
//! cleared without being reduced. [`rips_diagrams`] computes the same diagrams
//! for dimensions 0 and 1 straight from a distance matrix without listing
//! triangles; [`cross_barcode`] uses it.

mod rips;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::filtration::{cross_vr_filtration, default_cross_scale, default_vr_scale, vr_filtration, Filtration};
use crate::geometry::{cross_distance_matrix, pairwise_distances, DistanceMatrix, PointCloud};
use crate::{Error, Result};

pub use rips::rips_diagrams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair {
    pub birth: f64,
    /// `f64::INFINITY` for essential classes.
    pub death: f64,
}

impl PersistencePair {
    pub fn new(birth: f64, death: f64) -> Self {
        Self { birth, death }
    }

    pub fn is_essential(&self) -> bool {
        self.death.is_infinite()
    }

    pub fn is_zero_length(&self) -> bool {
        self.death == self.birth
    }

    pub fn lifetime(&self) -> f64 {
        self.death - self.birth
    }

    /// Finite with positive lifetime: the pairs summaries work with.
    pub fn is_proper(&self) -> bool {
        self.death.is_finite() && self.death > self.birth
    }
}

/// Birth/death pairs in one homology dimension.
///
/// Zero-length pairs are kept; summaries skip them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub dim: usize,
    pub pairs: Vec<PersistencePair>,
}

impl PersistenceDiagram {
    pub fn new(dim: usize, mut pairs: Vec<PersistencePair>) -> Self {
        sort_pairs(&mut pairs);
        Self { dim, pairs }
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, pairs: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn proper_pairs(&self) -> impl Iterator<Item = &PersistencePair> + '_ {
        self.pairs.iter().filter(|p| p.is_proper())
    }

    pub fn essential_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.is_essential()).count()
    }

    pub fn zero_length_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.is_zero_length()).count()
    }

    /// Diagram without zero-length pairs.
    pub fn without_zero_length(&self) -> Self {
        Self {
            dim: self.dim,
            pairs: self.pairs.iter().filter(|p| !p.is_zero_length()).copied().collect(),
        }
    }
}

fn sort_pairs(pairs: &mut [PersistencePair]) {
    pairs.sort_by(|a, b| a.birth.total_cmp(&b.birth).then(a.death.total_cmp(&b.death)));
}

/// Which column kills each simplex, by filtration index.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionTrace {
    pub pairing: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReduceOptions {
    pub clearing: bool,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        Self { clearing: true }
    }
}

/// Diagrams for dimensions `0..=max_hom_dim` of a sorted, monotone filtration.
pub fn reduce(filt: &Filtration, max_hom_dim: usize) -> Result<Vec<PersistenceDiagram>> {
    reduce_with(filt, max_hom_dim, ReduceOptions::default()).map(|(d, _)| d)
}

pub fn reduce_with(
    filt: &Filtration,
    max_hom_dim: usize,
    opts: ReduceOptions,
) -> Result<(Vec<PersistenceDiagram>, ReductionTrace)> {
    if max_hom_dim > filt.max_dim() {
        return Err(Error::invalid(format!(
            "homology dimension {max_hom_dim} exceeds filtration max_dim {}",
            filt.max_dim()
        )));
    }
    filt.check_sorted()?;
    let simplices = filt.simplices();
    let top = max_hom_dim + 1;

    let index: HashMap<&[usize], usize> = simplices
        .iter()
        .enumerate()
        .map(|(i, s)| (s.simplex.vertices(), i))
        .collect();

    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(simplices.len());
    for (j, s) in simplices.iter().enumerate() {
        let mut col = Vec::new();
        if s.simplex.dim() <= top {
            for face in s.simplex.facets() {
                let i = *index.get(face.vertices()).ok_or_else(|| {
                    Error::invalid(format!("face {:?} of a listed simplex is missing", face.vertices()))
                })?;
                if i > j {
                    return Err(Error::invalid(format!(
                        "face {:?} enters after its coface (monotony violated)",
                        face.vertices()
                    )));
                }
                col.push(i);
            }
        }
        col.sort_unstable();
        columns.push(col);
    }

    let n = simplices.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut cleared = vec![false; n];

    let mut order: Vec<usize> = (0..n).filter(|&j| simplices[j].simplex.dim() <= top).collect();
    if opts.clearing {
        // stable: filtration order within each dimension, top dimension first
        order.sort_by_key(|&j| std::cmp::Reverse(simplices[j].simplex.dim()));
    }

    let mut scratch = Vec::new();
    for j in order {
        if opts.clearing && owner[j].is_some() {
            columns[j].clear();
            cleared[j] = true;
            continue;
        }
        while let Some(&low) = columns[j].last() {
            match owner[low] {
                Some(k) => {
                    symmetric_difference(&columns[j], &columns[k], &mut scratch);
                    std::mem::swap(&mut columns[j], &mut scratch);
                }
                None => {
                    owner[low] = Some(j);
                    break;
                }
            }
        }
    }

    let mut pairs: Vec<Vec<PersistencePair>> = vec![Vec::new(); max_hom_dim + 1];
    let mut pairing = vec![None; n];
    for (i, s) in simplices.iter().enumerate() {
        let d = s.simplex.dim();
        if let Some(j) = owner[i] {
            pairing[i] = Some(j);
            if d <= max_hom_dim {
                pairs[d].push(PersistencePair::new(s.value, simplices[j].value));
            }
        } else if d <= max_hom_dim && columns[i].is_empty() && !cleared[i] {
            pairs[d].push(PersistencePair::new(s.value, f64::INFINITY));
        }
    }

    let diagrams = pairs
        .into_iter()
        .enumerate()
        .map(|(d, p)| PersistenceDiagram::new(d, p))
        .collect();
    Ok((diagrams, ReductionTrace { pairing }))
}

fn symmetric_difference(a: &[usize], b: &[usize], out: &mut Vec<usize>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Filtration cutoff: an explicit value or the per-construction default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MaxScale {
    /// Enclosing radius for plain Rips, largest entry for cross Rips.
    Auto,
    Value(f64),
}

impl MaxScale {
    fn resolve(self, auto: impl FnOnce() -> f64) -> Result<f64> {
        match self {
            MaxScale::Auto => Ok(auto()),
            MaxScale::Value(v) if v >= 0.0 => Ok(v),
            MaxScale::Value(v) => Err(Error::invalid(format!("max scale must be >= 0, got {v}"))),
        }
    }
}

/// Diagrams of a distance matrix's Rips filtration for dims `0..=max_hom_dim`.
///
/// Dimensions 0 and 1 go through the matrix-free engine; higher dimensions
/// build the explicit filtration.
pub fn distance_diagrams(dist: &DistanceMatrix, max_hom_dim: usize, max_scale: f64) -> Result<Vec<PersistenceDiagram>> {
    if max_hom_dim <= 1 {
        rips_diagrams(dist, max_hom_dim, max_scale)
    } else {
        reduce(&vr_filtration(dist, max_hom_dim, max_scale), max_hom_dim)
    }
}

/// Rips persistence of a single cloud in dimension `dim`.
pub fn vr_barcode(cloud: &PointCloud, dim: usize, max_scale: MaxScale) -> Result<PersistenceDiagram> {
    let dist = pairwise_distances(cloud);
    let scale = max_scale.resolve(|| default_vr_scale(&dist))?;
    let mut diagrams = distance_diagrams(&dist, dim, scale)?;
    Ok(diagrams.swap_remove(dim))
}

/// Cross-barcode of `(left, right)` in dimension `dim`.
///
/// Argument order matters: distances among `right` points are zeroed.
pub fn cross_barcode(left: &PointCloud, right: &PointCloud, dim: usize, max_scale: MaxScale) -> Result<PersistenceDiagram> {
    let cross = cross_distance_matrix(left, right)?;
    let scale = max_scale.resolve(|| default_cross_scale(&cross))?;
    let mut diagrams = distance_diagrams(cross.matrix(), dim, scale)?;
    Ok(diagrams.swap_remove(dim))
}

/// Cross-barcode through the explicit filtration and [`reduce`]; slow, but it
/// works in every dimension and serves as the reference route.
pub fn cross_barcode_explicit(
    left: &PointCloud,
    right: &PointCloud,
    dim: usize,
    max_scale: MaxScale,
) -> Result<PersistenceDiagram> {
    let cross = cross_distance_matrix(left, right)?;
    let scale = max_scale.resolve(|| default_cross_scale(&cross))?;
    let filt = cross_vr_filtration(&cross, dim, scale);
    let mut diagrams = reduce(&filt, dim)?;
    Ok(diagrams.swap_remove(dim))
}
