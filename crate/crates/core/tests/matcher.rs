mod common;

use common::*;
use kinface::matcher::{match_decision, score_matrix, Threshold};
use kinface::{cosine_similarity, l2_normalize, Error};
use proptest::prelude::*;

#[test]
fn normalization_examples() {
    assert_eq!(l2_normalize(&[3.0, 4.0]).unwrap(), vec![0.6, 0.8]);
    assert_eq!(l2_normalize(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
    assert!(matches!(l2_normalize(&[0.0, 0.0]), Err(Error::ZeroVector)));
}

#[test]
fn cosine_examples() {
    assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
    assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    assert!((cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
}

#[test]
fn strict_acceptance() {
    let t = Threshold::new(0.2).unwrap();
    assert!(match_decision(0.5, t));
    assert!(!match_decision(0.2, t));
    assert!(!match_decision(-0.1, t));
    assert!(Threshold::new(f64::NAN).is_err());
}

#[test]
fn score_matrix_examples() {
    let one = score_matrix(&[vec![0.3, 0.4]], &[vec![0.3, 0.4]]).unwrap();
    assert!((one.get(0, 0) - 1.0).abs() < 1e-15);
    let basis = [vec![1.0, 0.0], vec![0.0, 1.0]];
    let m = score_matrix(&basis, &basis).unwrap();
    assert_eq!((m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1)), (1.0, 0.0, 0.0, 1.0));

    let mut r = rng(1);
    let probes: Vec<Vec<f64>> = (0..3).map(|_| random_unit(&mut r, 6)).collect();
    let refs: Vec<Vec<f64>> = (0..2).map(|_| random_unit(&mut r, 6)).collect();
    let m = score_matrix(&probes, &refs).unwrap();
    for (i, p) in probes.iter().enumerate() {
        for (j, q) in refs.iter().enumerate() {
            let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
            assert!((m.get(i, j) - dot).abs() < 1e-12);
        }
    }
    assert!(matches!(
        score_matrix(&[vec![1.0, 0.0]], &[vec![1.0, 0.0, 0.0]]),
        Err(Error::DimensionMismatch { .. })
    ));
}

fn vector(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, d).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cosine_properties(a in vector(5), b in vector(5), alpha in 0.01f64..100.0) {
        let ab = cosine_similarity(&a, &b).unwrap();
        prop_assert_eq!(ab, cosine_similarity(&b, &a).unwrap());
        prop_assert!((-1.0..=1.0).contains(&ab));
        let scaled: Vec<f64> = a.iter().map(|x| alpha * x).collect();
        prop_assert!((cosine_similarity(&scaled, &b).unwrap() - ab).abs() < 1e-12);
        prop_assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((l2_normalize(&a).unwrap().iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn transpose_symmetry(seed in 0u64..10_000, n in 1usize..5, m in 1usize..5) {
        let mut r = rng(seed);
        let a: Vec<Vec<f64>> = (0..n).map(|_| gaussian(&mut r, 4, 1.0)).collect();
        let b: Vec<Vec<f64>> = (0..m).map(|_| gaussian(&mut r, 4, 1.0)).collect();
        let ab = score_matrix(&a, &b).unwrap();
        let ba = score_matrix(&b, &a).unwrap().transpose();
        for i in 0..n {
            for j in 0..m {
                prop_assert!((ab.get(i, j) - ba.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decision_monotone(s1 in -1.0f64..1.0, s2 in -1.0f64..1.0, theta in -1.0f64..1.0) {
        let t = Threshold::new(theta).unwrap();
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        prop_assert!(!match_decision(lo, t) || match_decision(hi, t));
    }
}
