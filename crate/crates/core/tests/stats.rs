mod common;

use common::{random_cloud, rng};
use crosspers::persistence::{cross_barcode, MaxScale};
use crosspers::stats::{
    distinguish, kde1d, mtd_samples, noise_sensitivity_sweep, overlap, silverman_bandwidth, Bandwidth, Decision,
    DistinctionConfig, MtdSampling, NoiseRegime,
};
use crosspers::summaries::mtd;
use crosspers::synth::{sample_shape, Shape};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn gauss_kde(samples: &[f64], h: f64, z: f64) -> f64 {
    let c = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    samples.iter().map(|s| (-0.5 * ((z - s) / h).powi(2)).exp()).sum::<f64>() * c
}

fn sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[test]
fn kde_is_a_sum_of_gaussians() {
    let mut r = rng(4);
    for _ in 0..20 {
        let n = r.random_range(2..40);
        let s: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let k = kde1d(&s, Bandwidth::Auto).unwrap();
        assert_eq!(k.bandwidth, silverman_bandwidth(&s));
        let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((k.z_min - (lo - 3.0 * k.bandwidth)).abs() < 1e-12);
        assert!((k.z_max - (hi + 3.0 * k.bandwidth)).abs() < 1e-12);
        for z in [lo, 0.0, hi, 0.5 * (lo + hi)] {
            let want = gauss_kde(&s, k.bandwidth, z);
            assert!((k.evaluate(z) - want).abs() <= 1e-12 * want.max(1.0));
        }
    }
}

#[test]
fn silverman_against_hand_formula() {
    let mut r = rng(5);
    let s: Vec<f64> = (0..101).map(|_| r.random_range(0.0..1.0)).collect();
    let mut sorted = s.clone();
    sorted.sort_by(f64::total_cmp);
    // 101 points: quartiles sit exactly on order statistics 25 and 75
    let iqr = sorted[75] - sorted[25];
    let want = 0.9 * sd(&s).min(iqr / 1.34) * 101f64.powf(-0.2);
    assert!((silverman_bandwidth(&s) - want).abs() < 1e-15);
}

/// min(p, q) integrated on a fine midpoint grid, after renormalizing each
/// density on that grid.
fn overlap_oracle(a: &[f64], ha: f64, b: &[f64], hb: f64, lo: f64, hi: f64) -> f64 {
    let n = 20_000;
    let dz = (hi - lo) / n as f64;
    let zs: Vec<f64> = (0..n).map(|i| lo + (i as f64 + 0.5) * dz).collect();
    let p: Vec<f64> = zs.iter().map(|&z| gauss_kde(a, ha, z)).collect();
    let q: Vec<f64> = zs.iter().map(|&z| gauss_kde(b, hb, z)).collect();
    let (mp, mq) = (p.iter().sum::<f64>() * dz, q.iter().sum::<f64>() * dz);
    p.iter().zip(&q).map(|(x, y)| (x / mp).min(y / mq)).sum::<f64>() * dz
}

#[test]
fn overlap_matches_fine_grid_integration() {
    let mut r = rng(6);
    for _ in 0..15 {
        let a: Vec<f64> = (0..30).map(|_| r.random_range(0.0..2.0)).collect();
        let shift = r.random_range(-1.0..3.0);
        let b: Vec<f64> = (0..25).map(|_| r.random_range(0.0..1.5) + shift).collect();
        let (p, q) = (kde1d(&a, Bandwidth::Auto).unwrap(), kde1d(&b, Bandwidth::Auto).unwrap());
        let lo = p.z_min.min(q.z_min);
        let hi = p.z_max.max(q.z_max);
        let want = overlap_oracle(&a, p.bandwidth, &b, q.bandwidth, lo, hi);
        assert!((overlap(&p, &q) - want).abs() < 2e-3, "{} vs {want}", overlap(&p, &q));
    }
}

#[test]
fn gaussian_overlap_from_large_samples() {
    let mut r = rng(7);
    let n = Normal::new(0.0, 1.0).unwrap();
    let a: Vec<f64> = (0..10_000).map(|_| n.sample(&mut r)).collect();
    let b: Vec<f64> = (0..10_000).map(|_| n.sample(&mut r) + 2.0).collect();
    let o = overlap(&kde1d(&a, Bandwidth::Auto).unwrap(), &kde1d(&b, Bandwidth::Auto).unwrap());
    // 2 * Phi(-1)
    assert!((o - 0.317_310_507_862_914).abs() < 0.02, "{o}");
}

#[test]
fn full_subsamples_reproduce_the_ordered_cross_barcode() {
    let mut r = rng(8);
    let a = random_cloud(&mut r, 12, 2);
    let b = random_cloud(&mut r, 12, 2).scaled(2.0);
    let cfg = MtdSampling { n_pairs: 3, subsample_size: 12, hom_dim: 1, seed: 1, shared_subsamples: false };
    let ab = mtd_samples(&a, &b, &cfg).unwrap();
    let ba = mtd_samples(&b, &a, &cfg).unwrap();
    let want_ab = mtd(&cross_barcode(&a, &b, 1, MaxScale::Auto).unwrap());
    let want_ba = mtd(&cross_barcode(&b, &a, 1, MaxScale::Auto).unwrap());
    assert!(ab.iter().all(|&v| v == want_ab));
    assert!(ba.iter().all(|&v| v == want_ba));
}

#[test]
fn sampling_contracts() {
    let mut r = rng(9);
    let a = random_cloud(&mut r, 30, 2);
    let b = random_cloud(&mut r, 30, 2);
    let cfg = MtdSampling { n_pairs: 6, subsample_size: 10, hom_dim: 1, seed: 3, shared_subsamples: false };
    assert_eq!(mtd_samples(&a, &b, &cfg).unwrap(), mtd_samples(&a, &b, &cfg).unwrap());
    let other = MtdSampling { seed: 4, ..cfg.clone() };
    assert_ne!(mtd_samples(&a, &b, &cfg).unwrap(), mtd_samples(&a, &b, &other).unwrap());
    let shared = MtdSampling { shared_subsamples: true, ..cfg.clone() };
    assert!(mtd_samples(&a, &a, &shared).unwrap().iter().all(|&v| v == 0.0));
    let indep = mtd_samples(&a, &a, &cfg).unwrap();
    assert!(indep.iter().all(|&v| v >= 0.0) && indep.iter().any(|&v| v > 0.0));
    let too_big = MtdSampling { subsample_size: 31, ..cfg };
    assert!(mtd_samples(&a, &b, &too_big).is_err());
}

#[test]
fn report_is_consistent_with_its_samples() {
    let core = sample_shape(Shape::Circle, 120, 0.02, 1).unwrap();
    let cand = sample_shape(Shape::Blobs, 120, 0.02, 2).unwrap();
    for threshold in [0.05, 0.5, 1.0] {
        let cfg = DistinctionConfig { n_pairs: 12, subsample_size: 40, threshold, seed: 2, ..Default::default() };
        let rep = distinguish(&core, &cand, &cfg).unwrap();
        let o = overlap(&kde1d(&rep.core_samples, Bandwidth::Auto).unwrap(), &kde1d(&rep.candidate_samples, Bandwidth::Auto).unwrap());
        assert_eq!(rep.overlap, o);
        assert!((0.0..=1.0).contains(&rep.overlap));
        assert_eq!(rep.decision == Decision::Different, rep.overlap < threshold);
    }
}

#[test]
fn sweep_level_zero_agrees_with_distinguish() {
    let clouds: Vec<_> = [Shape::Circle, Shape::Blobs, Shape::TwoCircles]
        .iter()
        .enumerate()
        .map(|(k, &s)| sample_shape(s, 80, 0.02, k as u64).unwrap())
        .collect();
    let cfg = DistinctionConfig { n_pairs: 8, subsample_size: 30, seed: 5, ..Default::default() };
    for regime in [NoiseRegime::RightOnly, NoiseRegime::Both] {
        let t = noise_sensitivity_sweep(&clouds, &[0.0, 0.5], regime, &cfg).unwrap();
        assert_eq!(t.rows.len(), 2);
        let row = &t.rows[0];
        assert_eq!(row.pairs.len(), 6);
        for p in &row.pairs {
            assert_ne!(p.left, p.right);
            let d = distinguish(&clouds[p.left], &clouds[p.right], &cfg).unwrap();
            assert_eq!(p.overlap, d.overlap);
        }
        let mean = row.pairs.iter().map(|p| p.overlap).sum::<f64>() / 6.0;
        assert_eq!(row.mean_overlap, mean);
    }
    assert!(noise_sensitivity_sweep(&clouds[..1], &[0.0], NoiseRegime::RightOnly, &cfg).is_err());
    assert!(noise_sensitivity_sweep(&clouds, &[], NoiseRegime::RightOnly, &cfg).is_err());
}

/// Exhaustive check on small empirical measures: the law of MTD values is no
/// further apart in total variation than the law of the diagrams.
#[test]
fn mtd_pushforward_does_not_increase_total_variation() {
    let mut r = rng(10);
    for _ in 0..200 {
        let atoms = r.random_range(1..=6);
        // atom MTD values with deliberate collisions
        let values: Vec<f64> = (0..atoms).map(|_| r.random_range(0..3) as f64).collect();
        let draw = |r: &mut rand_chacha::ChaCha8Rng| {
            let w: Vec<f64> = (0..atoms).map(|_| r.random_range(0.0..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let (mu, nu) = (draw(&mut r), draw(&mut r));
        let tv_atoms = 0.5 * mu.iter().zip(&nu).map(|(a, b)| (a - b).abs()).sum::<f64>();
        let mut tv_values = 0.0;
        for v in [0.0, 1.0, 2.0] {
            let m: f64 = (0..atoms).filter(|&i| values[i] == v).map(|i| mu[i]).sum();
            let n: f64 = (0..atoms).filter(|&i| values[i] == v).map(|i| nu[i]).sum();
            tv_values += 0.5 * (m - n).abs();
        }
        assert!(tv_values <= tv_atoms + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn overlap_is_symmetric_and_bounded(seed in 0u64..10_000, shift in -3.0f64..3.0) {
        let mut r = rng(seed);
        let a: Vec<f64> = (0..20).map(|_| r.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..15).map(|_| r.random_range(0.0..2.0) + shift).collect();
        let (p, q) = (kde1d(&a, Bandwidth::Auto).unwrap(), kde1d(&b, Bandwidth::Auto).unwrap());
        let (pq, qp) = (overlap(&p, &q), overlap(&q, &p));
        prop_assert_eq!(pq, qp);
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert!((overlap(&p, &p) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn kde_integrates_to_about_one(seed in 0u64..10_000, n in 2usize..60) {
        let mut r = rng(seed);
        let s: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let k = kde1d(&s, Bandwidth::Auto).unwrap();
        prop_assert!((k.mass() - 1.0).abs() < 5e-3);
        prop_assert!(k.grid().iter().all(|&z| k.evaluate(z) >= 0.0));
    }
}
