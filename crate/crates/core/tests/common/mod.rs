//! Reference implementations used as test oracles. They share no code with the
//! library beyond the point and matrix containers.
#![allow(dead_code)]

use crosspers::geometry::PointCloud;
use crosspers::persistence::PersistenceDiagram;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> PointCloud {
    PointCloud::new((0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()).unwrap()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Every vertex subset of size `1..=max_size` with the value `value(subset)`,
/// enumerated by bitmask.
pub fn all_subsets(n: usize, max_size: usize, value: impl Fn(&[usize]) -> f64) -> Vec<(Vec<usize>, f64)> {
    assert!(n < 20);
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        if mask.count_ones() as usize > max_size {
            continue;
        }
        let verts: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let v = value(&verts);
        out.push((verts, v));
    }
    out
}

/// Diameter of a vertex set under `d`.
pub fn diameter(verts: &[usize], d: impl Fn(usize, usize) -> f64) -> f64 {
    let mut m = 0.0f64;
    for (a, &i) in verts.iter().enumerate() {
        for &j in &verts[a + 1..] {
            m = m.max(d(i, j));
        }
    }
    m
}

/// The cross filtering function: max over `i` in `J` and `j` in the left part
/// of `J` of the raw Euclidean distance, or 0 when `J` has no left vertex.
/// Vertices `0..left.len()` are left points, the rest right points.
pub fn phi(left: &PointCloud, right: &PointCloud, verts: &[usize]) -> f64 {
    let nl = left.len();
    let point = |v: usize| if v < nl { left.point(v) } else { right.point(v - nl) };
    let mut m = 0.0f64;
    for &j in verts.iter().filter(|&&v| v < nl) {
        for &i in verts {
            m = m.max(dist(point(i), point(j)));
        }
    }
    m
}

/// Rank over Z/2 of the columns given as bitsets.
fn rank_z2(mut cols: Vec<Vec<u64>>) -> usize {
    let mut rank = 0;
    let words = cols.first().map_or(0, |c| c.len());
    for bit in 0..words * 64 {
        let (w, b) = (bit / 64, 1u64 << (bit % 64));
        let Some(p) = (rank..cols.len()).find(|&c| cols[c][w] & b != 0) else {
            continue;
        };
        cols.swap(rank, p);
        let pivot = cols[rank].clone();
        for c in cols.iter_mut().skip(rank + 1) {
            if c[w] & b != 0 {
                c.iter_mut().zip(&pivot).for_each(|(x, y)| *x ^= y);
            }
        }
        rank += 1;
    }
    rank
}

/// Persistence pairs of positive length plus essential classes, per
/// dimension, from persistent Betti numbers
/// `beta_k(a, b) = dim Z_k(K_a) - dim(B_k(K_b) ∩ C_k(K_a))`, with every rank
/// computed by Gaussian elimination. Pairs are returned sorted.
pub fn betti_pairs(simplices: &[(Vec<usize>, f64)], max_hom_dim: usize) -> Vec<Vec<(f64, f64)>> {
    let mut values: Vec<f64> = simplices.iter().map(|s| s.1).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let m = values.len();

    let by_size = |size: usize| -> Vec<&(Vec<usize>, f64)> { simplices.iter().filter(|s| s.0.len() == size).collect() };
    let mut out = Vec::new();
    for k in 0..=max_hom_dim {
        let rows = by_size(k + 1);
        let cols = by_size(k + 2);
        let row_index = |v: &[usize]| rows.iter().position(|r| r.0 == v).expect("face present");
        let words = rows.len().div_ceil(64).max(1);
        let column = |s: &(Vec<usize>, f64)| -> Vec<u64> {
            let mut c = vec![0u64; words];
            for skip in 0..s.0.len() {
                let face: Vec<usize> = s.0.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
                let r = row_index(&face);
                c[r / 64] ^= 1 << (r % 64);
            }
            c
        };
        let down = by_size(k);
        let down_index = |v: &[usize]| down.iter().position(|r| r.0 == v).expect("face present");
        let down_words = down.len().div_ceil(64).max(1);
        // rank of the boundary of k-simplices with value <= a
        let rank_k = |a: f64| -> usize {
            if k == 0 {
                return 0;
            }
            let cs: Vec<Vec<u64>> = rows
                .iter()
                .filter(|s| s.1 <= a)
                .map(|s| {
                    let mut c = vec![0u64; down_words];
                    for skip in 0..s.0.len() {
                        let face: Vec<usize> = s.0.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
                        let r = down_index(&face);
                        c[r / 64] ^= 1 << (r % 64);
                    }
                    c
                })
                .collect();
            rank_z2(cs)
        };
        let beta = |ai: usize, bi: usize| -> i64 {
            let (a, b) = (values[ai], values[bi]);
            let n_k = rows.iter().filter(|s| s.1 <= a).count() as i64;
            let z = n_k - rank_k(a) as i64;
            let bcols: Vec<Vec<u64>> = cols.iter().filter(|s| s.1 <= b).map(|s| column(s)).collect();
            let full = rank_z2(bcols.clone()) as i64;
            let mask: Vec<u64> = {
                let mut mk = vec![0u64; words];
                for (r, s) in rows.iter().enumerate() {
                    if s.1 > a {
                        mk[r / 64] |= 1 << (r % 64);
                    }
                }
                mk
            };
            let projected: Vec<Vec<u64>> = bcols.into_iter().map(|c| c.iter().zip(&mask).map(|(x, y)| x & y).collect()).collect();
            let proj = rank_z2(projected) as i64;
            z - (full - proj)
        };
        let b = |i: isize, j: usize| -> i64 { if i < 0 { 0 } else { beta(i as usize, j) } };
        let mut pairs = Vec::new();
        for i in 0..m {
            let ii = i as isize;
            for j in (i + 1)..m {
                let mu = b(ii, j - 1) - b(ii - 1, j - 1) - b(ii, j) + b(ii - 1, j);
                assert!(mu >= 0, "negative multiplicity");
                for _ in 0..mu {
                    pairs.push((values[i], values[j]));
                }
            }
            let ess = b(ii, m - 1) - b(ii - 1, m - 1);
            assert!(ess >= 0);
            for _ in 0..ess {
                pairs.push((values[i], f64::INFINITY));
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        out.push(pairs);
    }
    out
}

/// Positive-length and essential pairs of a library diagram, sorted.
pub fn visible_pairs(d: &PersistenceDiagram) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = d.pairs.iter().filter(|p| p.death > p.birth).map(|p| (p.birth, p.death)).collect();
    v.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    v
}

/// ROC-AUC by counting all positive/negative pairs, ties worth one half.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0u64; // twice the count
    let mut pos = 0u64;
    let mut neg = 0u64;
    for (i, &li) in labels.iter().enumerate() {
        if li {
            pos += 1;
        } else {
            neg += 1;
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            num += if scores[i] > scores[j] {
                2
            } else if scores[i] == scores[j] {
                1
            } else {
                0
            };
        }
    }
    num as f64 / (2 * pos * neg) as f64
}
