//! Vietoris-Rips filtrations, plain and cross.
//!
//! The cross filtration assigns a simplex `J = J_X ∪ J_Y` (vertices from the
//! left and right clouds) the value `max_{i ∈ J, j ∈ J_X} |x_i - x_j|` when
//! `J_X` is nonempty and `0` otherwise. On the cross distance matrix, where
//! right-right entries are zero, that is exactly the largest matrix entry among
//! the simplex vertices, so both filtrations share one clique enumerator.

use std::cmp::Ordering;

use crate::geometry::{CrossDistanceMatrix, DistanceMatrix};
use crate::{Error, Result};

/// Strictly increasing vertex indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Simplex {
    vertices: Vec<usize>,
}

impl Simplex {
    pub fn new(mut vertices: Vec<usize>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Empty("simplex"));
        }
        vertices.sort_unstable();
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("simplex vertices must be distinct"));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    /// Codimension-1 faces, each missing one vertex (in vertex order).
    pub fn facets(&self) -> impl Iterator<Item = Simplex> + '_ {
        let k = self.vertices.len();
        (0..if k > 1 { k } else { 0 }).map(move |skip| Simplex {
            vertices: self
                .vertices
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, &v)| v)
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSimplex {
    pub simplex: Simplex,
    pub value: f64,
}

/// Filtration order: value, then dimension, then lexicographic vertices.
pub fn filtration_cmp(a: &FilteredSimplex, b: &FilteredSimplex) -> Ordering {
    a.value
        .total_cmp(&b.value)
        .then(a.simplex.dim().cmp(&b.simplex.dim()))
        .then_with(|| a.simplex.vertices.cmp(&b.simplex.vertices))
}

/// Simplices with their entry values.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtration {
    simplices: Vec<FilteredSimplex>,
    max_dim: usize,
    max_scale: f64,
}

impl Filtration {
    /// Wraps simplices as given; ordering is checked by [`Filtration::check_sorted`].
    pub fn from_parts(simplices: Vec<FilteredSimplex>, max_dim: usize, max_scale: f64) -> Self {
        Self {
            simplices,
            max_dim,
            max_scale,
        }
    }

    pub fn simplices(&self) -> &[FilteredSimplex] {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    /// Largest homology dimension this filtration supports; it carries
    /// simplices up to `max_dim + 1`.
    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn max_scale(&self) -> f64 {
        self.max_scale
    }

    pub fn sort(&mut self) {
        self.simplices.sort_by(filtration_cmp);
    }

    pub fn check_sorted(&self) -> Result<()> {
        match self
            .simplices
            .windows(2)
            .position(|w| filtration_cmp(&w[0], &w[1]) != Ordering::Less)
        {
            Some(i) => Err(Error::UnsortedFiltration(i + 1)),
            None => Ok(()),
        }
    }

    /// Multiset of `(dim, value)` pairs, sorted.
    pub fn dim_values(&self) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self
            .simplices
            .iter()
            .map(|s| (s.simplex.dim(), s.value))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        v
    }
}

/// Default scale for plain Rips: the enclosing radius, past which the complex
/// is a cone and no finite class can be born.
pub fn default_vr_scale(dist: &DistanceMatrix) -> f64 {
    dist.enclosing_radius()
}

/// Default scale for cross Rips: the largest matrix entry.
pub fn default_cross_scale(cross: &CrossDistanceMatrix) -> f64 {
    cross.matrix().max_entry()
}

/// All cliques up to dimension `max_dim + 1` whose diameter is `<= max_scale`.
///
/// Cliques grow by neighborhood expansion: a simplex is only extended by
/// higher-indexed vertices within `max_scale` of every current vertex.
pub fn vr_filtration(dist: &DistanceMatrix, max_dim: usize, max_scale: f64) -> Filtration {
    let n = dist.size();
    let top = max_dim + 1;
    let mut out = Vec::new();
    let upper: Vec<Vec<usize>> = (0..n)
        .map(|v| ((v + 1)..n).filter(|&u| dist.get(v, u) <= max_scale).collect())
        .collect();

    let mut stack: Vec<(Vec<usize>, f64)> = (0..n).rev().map(|v| (vec![v], 0.0)).collect();
    while let Some((verts, value)) = stack.pop() {
        let last = *verts.last().expect("nonempty");
        if verts.len() <= top {
            for &u in upper[last].iter().rev() {
                let mut val = value;
                let mut ok = true;
                for &w in &verts {
                    let d = dist.get(w, u);
                    if d > max_scale {
                        ok = false;
                        break;
                    }
                    val = val.max(d);
                }
                if ok {
                    let mut next = verts.clone();
                    next.push(u);
                    stack.push((next, val));
                }
            }
        }
        out.push(FilteredSimplex {
            simplex: Simplex { vertices: verts },
            value,
        });
    }
    out.sort_by(filtration_cmp);
    Filtration {
        simplices: out,
        max_dim,
        max_scale,
    }
}

/// Cross Vietoris-Rips filtration: simplices entirely in the right block enter
/// at 0, every other simplex at the largest distance touching a left vertex.
pub fn cross_vr_filtration(cross: &CrossDistanceMatrix, max_dim: usize, max_scale: f64) -> Filtration {
    vr_filtration(cross.matrix(), max_dim, max_scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cross_distance_matrix, pairwise_distances, PointCloud};

    fn cloud(points: &[[f64; 2]]) -> PointCloud {
        PointCloud::new(points.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn two_points() {
        let d = pairwise_distances(&cloud(&[[0.0, 0.0], [1.0, 0.0]]));
        let f = vr_filtration(&d, 0, 2.0);
        let got: Vec<(usize, f64)> = f.simplices().iter().map(|s| (s.simplex.dim(), s.value)).collect();
        assert_eq!(got, vec![(0, 0.0), (0, 0.0), (1, 1.0)]);
        f.check_sorted().unwrap();
    }

    #[test]
    fn equilateral_triangle() {
        let d = DistanceMatrix::from_entries(3, vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        let f = vr_filtration(&d, 1, 2.0);
        assert_eq!(f.len(), 7);
        let dv = f.dim_values();
        assert_eq!(dv.iter().filter(|x| x.0 == 1).count(), 3);
        assert_eq!(dv.iter().filter(|x| x.0 == 2).count(), 1);
        assert!(dv.iter().filter(|x| x.0 > 0).all(|x| x.1 == 1.0));
    }

    #[test]
    fn scale_cutoff_drops_long_edges() {
        let d = pairwise_distances(&cloud(&[[0.0, 0.0], [1.0, 0.0], [5.0, 0.0]]));
        let f = vr_filtration(&d, 1, 2.0);
        assert_eq!(f.len(), 4);
        assert!(f.simplices().iter().all(|s| s.value <= 2.0));
    }

    #[test]
    fn single_left_single_right() {
        let p = cloud(&[[0.0, 0.0]]);
        let q = cloud(&[[1.0, 0.0]]);
        let c = cross_distance_matrix(&p, &q).unwrap();
        let f = cross_vr_filtration(&c, 0, default_cross_scale(&c));
        let got: Vec<(usize, f64)> = f.simplices().iter().map(|s| (s.simplex.dim(), s.value)).collect();
        assert_eq!(got, vec![(0, 0.0), (0, 0.0), (1, 1.0)]);
    }

    #[test]
    fn right_only_simplices_enter_at_zero() {
        let p = cloud(&[[0.0, 0.0], [3.0, 1.0]]);
        let q = cloud(&[[1.0, 0.0], [2.0, 5.0], [7.0, 1.0]]);
        let c = cross_distance_matrix(&p, &q).unwrap();
        let f = cross_vr_filtration(&c, 1, default_cross_scale(&c));
        for s in f.simplices() {
            if s.simplex.vertices().iter().all(|&v| !c.is_left(v)) {
                assert_eq!(s.value, 0.0);
            }
        }
        assert!(f.simplices().iter().any(|s| s.simplex.vertices() == [2, 3, 4] && s.value == 0.0));
    }

    #[test]
    fn unsorted_is_detected() {
        let d = pairwise_distances(&cloud(&[[0.0, 0.0], [1.0, 0.0]]));
        let f = vr_filtration(&d, 0, 2.0);
        let mut s = f.simplices().to_vec();
        s.reverse();
        let bad = Filtration::from_parts(s, 0, 2.0);
        assert!(matches!(bad.check_sorted(), Err(Error::UnsortedFiltration(_))));
    }

    #[test]
    fn facets_of_triangle() {
        let t = Simplex::new(vec![4, 1, 2]).unwrap();
        let f: Vec<Vec<usize>> = t.facets().map(|s| s.vertices().to_vec()).collect();
        assert_eq!(f, vec![vec![2, 4], vec![1, 4], vec![1, 2]]);
        assert_eq!(Simplex::new(vec![3]).unwrap().facets().count(), 0);
        assert!(Simplex::new(vec![1, 1]).is_err());
    }
}
