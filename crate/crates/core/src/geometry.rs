//! Point clouds, distance matrices, noise injection, delay embedding and PCA.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::symmetric_eigen;
use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// An ordered, nonempty set of points sharing one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty("point cloud"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::invalid("points must have dimension >= 1"));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Ok(Self { dim, coords })
    }

    /// Builds a cloud from row-major coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("points must have dimension >= 1"));
        }
        if coords.is_empty() {
            return Err(Error::Empty("point cloud"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinates is not a multiple of dimension {dim}",
                coords.len()
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// New cloud made of the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Empty("point selection"));
        }
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(format!("point index {i} out of range")));
            }
            coords.extend_from_slice(self.point(i));
        }
        Ok(Self {
            dim: self.dim,
            coords,
        })
    }

    /// Concatenation `self` then `other`.
    pub fn concat(&self, other: &PointCloud) -> Result<Self> {
        check_same_dim(self, other)?;
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Ok(Self {
            dim: self.dim,
            coords,
        })
    }

    /// Every coordinate multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            coords: self.coords.iter().map(|x| x * c).collect(),
        }
    }

    /// Point indices sorted lexicographically by coordinates (stable).
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| lex_cmp(self.point(a), self.point(b)));
        idx
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

fn check_same_dim(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    Ok(())
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Square symmetric matrix with zero diagonal, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Wraps row-major entries; checks shape, symmetry, zero diagonal and
    /// nonnegativity.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {n}x{n} matrix",
                entries.len()
            )));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::invalid("distance matrix diagonal must be zero"));
            }
            for j in 0..n {
                let x = entries[i * n + j];
                if !(x >= 0.0) || x != entries[j * n + i] {
                    return Err(Error::invalid(format!(
                        "entry ({i},{j}) is negative, NaN or asymmetric"
                    )));
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().cloned().fold(0.0, f64::max)
    }

    /// `min_v max_u d(v, u)`: above this scale the Rips complex is a cone.
    pub fn enclosing_radius(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().cloned().fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min)
    }

    /// Matrix of the same points relabelled: new index `k` is old `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self { n, entries }
    }
}

pub fn pairwise_distances(cloud: &PointCloud) -> DistanceMatrix {
    let n = cloud.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(cloud.point(i), cloud.point(j));
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    DistanceMatrix { n, entries }
}

/// Distances on `P ∪ Q` (P indexed first) with the within-Q block zeroed.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossDistanceMatrix {
    n_left: usize,
    n_right: usize,
    matrix: DistanceMatrix,
}

impl CrossDistanceMatrix {
    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    pub fn matrix(&self) -> &DistanceMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> DistanceMatrix {
        self.matrix
    }

    pub fn is_left(&self, vertex: usize) -> bool {
        vertex < self.n_left
    }
}

pub fn cross_distance_matrix(left: &PointCloud, right: &PointCloud) -> Result<CrossDistanceMatrix> {
    check_same_dim(left, right)?;
    let n_left = left.len();
    let n_right = right.len();
    let n = n_left + n_right;
    let point = |k: usize| {
        if k < n_left {
            left.point(k)
        } else {
            right.point(k - n_left)
        }
    };
    let mut entries = vec![0.0; n * n];
    for i in 0..n_left {
        for j in (i + 1)..n {
            let d = euclidean(point(i), point(j));
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    Ok(CrossDistanceMatrix {
        n_left,
        n_right,
        matrix: DistanceMatrix { n, entries },
    })
}

/// Adds Gaussian noise rescaled per point so that `|ξ_i| / |x_i| = relative_norm`.
///
/// Points at the origin get noise of norm `relative_norm * mean_i |x_i|`.
/// Deterministic for a given seed (ChaCha8 stream, ziggurat normals).
pub fn inject_noise(cloud: &PointCloud, relative_norm: f64, seed: u64) -> Result<PointCloud> {
    if !(relative_norm >= 0.0) || !relative_norm.is_finite() {
        return Err(Error::invalid(format!(
            "relative noise norm must be a finite value >= 0, got {relative_norm}"
        )));
    }
    if relative_norm == 0.0 {
        return Ok(cloud.clone());
    }
    let mut rng = rng_from_seed(seed);
    let mean_norm = cloud.points().map(norm).sum::<f64>() / cloud.len() as f64;
    let mut coords = Vec::with_capacity(cloud.coords.len());
    let mut xi = vec![0.0; cloud.dim];
    for p in cloud.points() {
        let xi_norm = loop {
            for v in xi.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let n = norm(&xi);
            if n > 0.0 {
                break n;
            }
        };
        let p_norm = norm(p);
        let target = if p_norm > 0.0 { relative_norm * p_norm } else { relative_norm * mean_norm };
        let s = target / xi_norm;
        coords.extend(p.iter().zip(&xi).map(|(x, e)| x + s * e));
    }
    Ok(PointCloud {
        dim: cloud.dim,
        coords,
    })
}

/// A real-valued sequence of length at least 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "time series needs at least 2 values, got {}",
                values.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Sliding-window embedding: point `k` is `(v_k, v_{k+τ}, ..., v_{k+(m-1)τ})`.
pub fn time_delay_embedding(series: &TimeSeries, embedding_dim: usize, delay: usize) -> Result<PointCloud> {
    if embedding_dim == 0 || delay == 0 {
        return Err(Error::invalid("embedding dimension and delay must be >= 1"));
    }
    let span = (embedding_dim - 1) * delay;
    let len = series.len();
    if len < span + 1 {
        return Err(Error::SeriesTooShort {
            len,
            dim: embedding_dim,
            delay,
        });
    }
    let n = len - span;
    let mut coords = Vec::with_capacity(n * embedding_dim);
    for k in 0..n {
        coords.extend((0..embedding_dim).map(|j| series.values[k + j * delay]));
    }
    PointCloud::from_flat(embedding_dim, coords)
}

/// Principal axes of a cloud, fitted once and reusable on new points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Row `k` is the k-th principal axis (unit length).
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl Pca {
    /// Fits `k` components from the sample covariance (divisor `n - 1`, or 1
    /// for a single point).
    pub fn fit<'a, I>(rows: I, dim: usize, k: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        if k == 0 || k > dim {
            return Err(Error::invalid(format!(
                "PCA needs 1 <= k <= d, got k = {k}, d = {dim}"
            )));
        }
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        if rows.is_empty() {
            return Err(Error::Empty("PCA input"));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.len(),
            });
        }
        let n = rows.len();
        let mut mean = vec![0.0; dim];
        for r in &rows {
            for (m, x) in mean.iter_mut().zip(r.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        if n < dim {
            if let Some(p) = Self::fit_gram(&rows, &mean, k) {
                return Ok(p);
            }
        }

        let mut cov = vec![0.0; dim * dim];
        let mut centered = vec![0.0; dim];
        for r in &rows {
            for (c, (x, m)) in centered.iter_mut().zip(r.iter().zip(&mean)) {
                *c = x - m;
            }
            for i in 0..dim {
                let ci = centered[i];
                if ci == 0.0 {
                    continue;
                }
                for j in i..dim {
                    cov[i * dim + j] += ci * centered[j];
                }
            }
        }
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        for i in 0..dim {
            for j in i..dim {
                let v = cov[i * dim + j] / denom;
                cov[i * dim + j] = v;
                cov[j * dim + i] = v;
            }
        }
        let eig = symmetric_eigen(&cov, dim);
        Ok(Self {
            mean,
            components: eig.vectors.into_iter().take(k).collect(),
            eigenvalues: eig.values.into_iter().take(k).collect(),
        })
    }

    /// Same axes from the `n x n` Gram matrix, for `n < d`. `None` when the
    /// centered data has rank below `k`.
    fn fit_gram(rows: &[&[f64]], mean: &[f64], k: usize) -> Option<Self> {
        let n = rows.len();
        let centered: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(mean).map(|(x, m)| x - m).collect()).collect();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
                gram[i * n + j] = v;
                gram[j * n + i] = v;
            }
        }
        let eig = symmetric_eigen(&gram, n);
        let top = eig.values.first().copied().unwrap_or(0.0);
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        let mut components = Vec::with_capacity(k);
        let mut eigenvalues = Vec::with_capacity(k);
        for (lambda, u) in eig.values.iter().zip(&eig.vectors).take(k) {
            if !(*lambda > 1e-10 * top) {
                return None;
            }
            let mut c = vec![0.0; mean.len()];
            for (ui, row) in u.iter().zip(&centered) {
                c.iter_mut().zip(row).for_each(|(a, x)| *a += ui * x);
            }
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            let pivot = c.iter().fold(0.0f64, |best, &x| if x.abs() > best.abs() { x } else { best });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            c.iter_mut().for_each(|x| *x *= sign / norm);
            components.push(c);
            eigenvalues.push(lambda / denom);
        }
        Some(Self { mean: mean.to_vec(), components, eigenvalues })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(x.iter().zip(&self.mean)).map(|(a, (x, m))| a * (x - m)).sum())
            .collect()
    }

    pub fn transform(&self, cloud: &PointCloud) -> Result<PointCloud> {
        if cloud.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: cloud.dim(),
            });
        }
        let coords = cloud.points().flat_map(|p| self.project(p)).collect();
        PointCloud::from_flat(self.output_dim(), coords)
    }
}

/// Projects centered points onto the top-`k` covariance eigenvectors.
pub fn pca_reduce(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    Pca::fit(cloud.points(), cloud.dim(), k)?.transform(cloud)
}
