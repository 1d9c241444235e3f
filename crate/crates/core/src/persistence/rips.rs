//! Matrix-free Rips persistence in dimensions 0 and 1.
//!
//! Dimension 0 comes from union-find over edges in filtration order. For
//! dimension 1 the coboundary matrix (the anti-transpose of the boundary
//! matrix) is reduced column by column, edges in reverse filtration order,
//! with edge columns already paired in dimension 0 cleared. Coboundaries are
//! generated on the fly from the distance matrix; only the reduction
//! bookkeeping of non-trivial columns is stored. Both sides use the same total
//! order as [`crate::filtration::filtration_cmp`], so the pairs equal the ones
//! [`super::reduce`] produces on the explicit filtration.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::{PersistenceDiagram, PersistencePair};
use crate::geometry::DistanceMatrix;
use crate::{Error, Result};

/// Triangle in filtration order: value bits, then packed sorted vertices.
/// Nonnegative `f64` bit patterns sort like the values themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct TriKey {
    value: u64,
    verts: u64,
}

const VERTEX_BITS: u32 = 21;

impl TriKey {
    fn new(value: f64, i: usize, j: usize, k: usize) -> Self {
        let mut v = [i as u64, j as u64, k as u64];
        v.sort_unstable();
        Self {
            value: value.to_bits(),
            verts: (v[0] << (2 * VERTEX_BITS)) | (v[1] << VERTEX_BITS) | v[2],
        }
    }

    fn value(&self) -> f64 {
        f64::from_bits(self.value)
    }
}

struct Edges {
    /// `(value, i, j)` with `i < j`, in filtration order.
    list: Vec<(f64, u32, u32)>,
}

impl Edges {
    fn new(dist: &DistanceMatrix, max_scale: f64) -> Self {
        let n = dist.size();
        let mut list = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = dist.get(i, j);
                if d <= max_scale {
                    list.push((d, i as u32, j as u32));
                }
            }
        }
        list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        Self { list }
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Diagrams for dims `0..=max_hom_dim` (at most 1) of the Rips filtration of
/// `dist` truncated at `max_scale`.
pub fn rips_diagrams(dist: &DistanceMatrix, max_hom_dim: usize, max_scale: f64) -> Result<Vec<PersistenceDiagram>> {
    if max_hom_dim > 1 {
        return Err(Error::invalid(format!(
            "matrix-free engine supports dimensions 0 and 1, got {max_hom_dim}"
        )));
    }
    let n = dist.size();
    if n >= 1 << VERTEX_BITS {
        return Err(Error::invalid(format!("too many points ({n})")));
    }
    let edges = Edges::new(dist, max_scale);

    // Dimension 0. All vertices enter at 0; the younger (larger index) root dies.
    let mut parent: Vec<usize> = (0..n).collect();
    let mut negative = vec![false; edges.list.len()];
    let mut h0 = Vec::with_capacity(n);
    for (e, &(d, i, j)) in edges.list.iter().enumerate() {
        let (ri, rj) = (find(&mut parent, i as usize), find(&mut parent, j as usize));
        if ri != rj {
            let (old, young) = if ri < rj { (ri, rj) } else { (rj, ri) };
            parent[young] = old;
            negative[e] = true;
            h0.push(PersistencePair::new(0.0, d));
        }
    }
    let components = (0..n).filter(|&v| find(&mut parent, v) == v).count();
    h0.extend(std::iter::repeat_n(PersistencePair::new(0.0, f64::INFINITY), components));
    let mut diagrams = vec![PersistenceDiagram::new(0, h0)];
    if max_hom_dim == 0 {
        return Ok(diagrams);
    }

    diagrams.push(PersistenceDiagram::new(1, cohomology_h1(dist, &edges, &negative, max_scale)));
    Ok(diagrams)
}

struct Coboundary<'a> {
    dist: &'a DistanceMatrix,
    max_scale: f64,
}

impl Coboundary<'_> {
    fn for_each(&self, (d, i, j): (f64, u32, u32), mut f: impl FnMut(TriKey)) {
        let (i, j) = (i as usize, j as usize);
        let (ri, rj) = (self.dist.row(i), self.dist.row(j));
        for k in 0..ri.len() {
            if k == i || k == j {
                continue;
            }
            let v = d.max(ri[k]).max(rj[k]);
            if v <= self.max_scale {
                f(TriKey::new(v, i, j, k));
            }
        }
    }

    fn pivot(&self, edge: (f64, u32, u32)) -> Option<TriKey> {
        let mut best: Option<TriKey> = None;
        self.for_each(edge, |t| {
            if best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        });
        best
    }
}

/// Pops cancelling duplicates and returns the smallest surviving entry,
/// leaving it in the heap.
fn heap_pivot(heap: &mut BinaryHeap<Reverse<TriKey>>) -> Option<TriKey> {
    loop {
        let Reverse(top) = heap.pop()?;
        match heap.peek() {
            Some(&Reverse(next)) if next == top => {
                heap.pop();
            }
            _ => {
                heap.push(Reverse(top));
                return Some(top);
            }
        }
    }
}

fn cohomology_h1(dist: &DistanceMatrix, edges: &Edges, negative: &[bool], max_scale: f64) -> Vec<PersistencePair> {
    let cob = Coboundary { dist, max_scale };
    let mut owner: HashMap<TriKey, u32> = HashMap::new();
    // reduction columns that are more than the edge itself
    let mut combos: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut pairs = Vec::new();

    for e in (0..edges.list.len()).rev() {
        if negative[e] {
            continue;
        }
        let edge = edges.list[e];
        let birth = edge.0;
        let Some(pivot) = cob.pivot(edge) else {
            pairs.push(PersistencePair::new(birth, f64::INFINITY));
            continue;
        };
        if !owner.contains_key(&pivot) {
            owner.insert(pivot, e as u32);
            pairs.push(PersistencePair::new(birth, pivot.value()));
            continue;
        }

        let mut heap = BinaryHeap::new();
        cob.for_each(edge, |t| heap.push(Reverse(t)));
        let mut combo = vec![e as u32];
        let mut current = Some(pivot);
        while let Some(t) = current {
            match owner.get(&t) {
                Some(&o) => {
                    let added: &[u32] = match combos.get(&o) {
                        Some(c) => c,
                        None => std::slice::from_ref(&o),
                    };
                    for &a in added {
                        cob.for_each(edges.list[a as usize], |t| heap.push(Reverse(t)));
                    }
                    combo.extend_from_slice(added);
                    current = heap_pivot(&mut heap);
                }
                None => break,
            }
        }
        match current {
            Some(t) => {
                owner.insert(t, e as u32);
                pairs.push(PersistencePair::new(birth, t.value()));
                let combo = cancel_pairs(combo);
                if combo.len() > 1 {
                    combos.insert(e as u32, combo);
                }
            }
            None => pairs.push(PersistencePair::new(birth, f64::INFINITY)),
        }
    }
    pairs
}

/// Z/2 sum of a multiset of column labels.
fn cancel_pairs(mut v: Vec<u32>) -> Vec<u32> {
    v.sort_unstable();
    let mut out = Vec::with_capacity(v.len());
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        if (j - i) % 2 == 1 {
            out.push(v[i]);
        }
        i = j;
    }
    out
}
