mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use common::*;
use kinface::dataset::*;
use kinface::matcher::ScoreMatrix;
use kinface::{Embedding, Error};
use proptest::prelude::*;

fn family(fid: &str, members: &[(&str, usize)], rels: &[(&str, &str, RelationshipType)]) -> Family {
    let members = members
        .iter()
        .map(|(m, n)| (m.to_string(), (0..*n).map(|i| format!("{fid}_{m}_{i}")).collect()))
        .collect();
    let rels = rels.iter().map(|(a, b, t)| ((a.to_string(), b.to_string()), *t)).collect();
    Family::new(fid, members, rels).unwrap()
}

fn all_types() -> BTreeSet<RelationshipType> {
    RelationshipType::ALL.into_iter().collect()
}

/// Families of a father, a mother and two children with face counts cycled from `faces`.
fn universe(n: usize, faces: &[usize]) -> Vec<Family> {
    use RelationshipType::*;
    (0..n)
        .map(|f| {
            let c = |i: usize| faces[(f + i) % faces.len()];
            family(
                &format!("F{f:03}"),
                &[("dad", c(0)), ("mom", c(1)), ("son", c(2)), ("girl", c(3))],
                &[("dad", "son", FS), ("dad", "girl", FD), ("mom", "son", MS), ("mom", "girl", MD), ("son", "girl", SIBS)],
            )
        })
        .collect()
}

#[test]
fn database_stats_positive_count() {
    let fams: Vec<Family> = (0..100)
        .map(|i| family(&format!("F{i:03}"), &[("m1", FACES_PER_SUBJECT)], &[]))
        .collect();
    assert_eq!(generate_positive_pairs(&fams, &all_types(), true).len(), 30_000);
}

#[test]
fn benchmark_folds_are_family_disjoint() {
    let fams = universe(30, &[2, 3, 4, 1, 5]);
    let pairs = build_benchmark(&fams, &all_types(), false, 5, 9, &NegativeOptions::default()).unwrap();
    let fid = fid_index(&fams).unwrap();
    let mut fold_of: HashMap<&str, usize> = HashMap::new();
    for p in pairs.iter().filter(|p| p.label.is_kin()) {
        let f = fid[&p.id_a].as_str();
        assert_eq!(*fold_of.entry(f).or_insert(p.fold), p.fold, "family {f} spans folds");
    }
    let mut balance: BTreeMap<(usize, Option<Relation>), i64> = BTreeMap::new();
    for p in &pairs {
        if !p.label.is_kin() {
            assert_ne!(fid[&p.id_a], fid[&p.id_b]);
        }
        *balance.entry((p.fold, p.rel)).or_default() += if p.label.is_kin() { 1 } else { -1 };
    }
    assert!(balance.values().all(|&v| v == 0));
}

#[test]
fn negatives_reproducible_under_seed() {
    let fams = universe(12, &[2, 3]);
    let mut pos = generate_positive_pairs(&fams, &all_types(), false);
    assign_pair_folds(&mut pos, &fams, 3).unwrap();
    let opts = NegativeOptions::default();
    let a = sample_negative_pairs(&pos, &fams, 1, &opts).unwrap();
    assert_eq!(a, sample_negative_pairs(&pos, &fams, 1, &opts).unwrap());
    let b = sample_negative_pairs(&pos, &fams, 2, &opts).unwrap();
    assert_eq!(a.len(), b.len());
    assert_ne!(a, b);

    let one = universe(1, &[3]);
    let mut pos = generate_positive_pairs(&one, &all_types(), false);
    for p in &mut pos {
        p.fold = 0;
    }
    assert!(matches!(
        sample_negative_pairs(&pos, &one, 0, &opts),
        Err(Error::InsufficientCandidates { .. })
    ));
}

#[test]
fn fold_dealing_examples() {
    let counts: BTreeMap<String, usize> = [("a", 10), ("b", 8), ("c", 6), ("d", 4)]
        .into_iter()
        .map(|(s, c)| (s.to_string(), c))
        .collect();
    let folds = assign_folds(&counts, 2).unwrap();
    assert_eq!((folds["a"], folds["b"], folds["c"], folds["d"]), (0, 1, 0, 1));
    let single = BTreeMap::from([("x".to_string(), 3)]);
    assert_eq!(assign_folds(&single, 5).unwrap()["x"], 0);
    let ties: BTreeMap<String, usize> = ["q", "p", "r"].into_iter().map(|s| (s.to_string(), 2)).collect();
    let folds = assign_folds(&ties, 3).unwrap();
    assert_eq!((folds["p"], folds["q"], folds["r"]), (0, 1, 2));
    assert!(matches!(assign_folds(&counts, 1), Err(Error::InvalidFoldCount(1))));
}

fn nearest_rank_oracle(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank - 1]
}

#[test]
fn pruning_matches_sort_and_index() {
    let mut r = rng(5);
    let rows: Vec<Vec<f64>> = (0..5).map(|_| gaussian(&mut r, 7, 0.3)).collect();
    let out = prune_faces_by_median(&ScoreMatrix::from_rows(rows.clone()).unwrap(), PRUNE_THETA, PRUNE_PERCENTILE).unwrap();
    for (i, row) in rows.iter().enumerate() {
        let keep = nearest_rank_oracle(row, 50.0) >= 0.2;
        assert_eq!(out.kept.contains(&i), keep);
        assert_eq!(out.dropped.contains(&i), !keep);
    }
}

#[test]
fn track_decisions() {
    assert!(!track_match_decision(&[0.1, 0.3, 0.4, 0.5], TRACK_THETA, TRACK_PERCENTILE).unwrap());
    assert!(track_match_decision(&[0.9; 6], TRACK_THETA, TRACK_PERCENTILE).unwrap());
    assert!(track_match_decision(&[0.26], TRACK_THETA, TRACK_PERCENTILE).unwrap());
    assert!(matches!(track_match_decision(&[], 0.25, 25.0), Err(Error::EmptyScores)));
}

#[test]
fn track_pooling_oracle() {
    let mut r = rng(6);
    let frames: Vec<Embedding> = (0..7).map(|i| Embedding::new(format!("f{i}"), gaussian(&mut r, 9, 1.0))).collect();
    let mean: Vec<f64> = (0..9).map(|j| frames.iter().map(|f| f.vec[j]).sum::<f64>() / 7.0).collect();
    let n = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
    let fused = fuse_track(&frames).unwrap();
    for (got, want) in fused.vec.iter().zip(&mean) {
        assert!((got - want / n).abs() < 1e-12);
    }
    assert!(matches!(fuse_track(&[]), Err(Error::EmptyTrack)));
    let cancel = [Embedding::new("a", vec![1.0, 0.0]), Embedding::new("b", vec![-1.0, 0.0])];
    assert!(matches!(fuse_track(&cancel), Err(Error::ZeroVector)));
}

fn face_counts() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..6, 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn positive_count_closed_form(counts in face_counts(), fams in 1usize..5, same in any::<bool>()) {
        let u = universe(fams, &counts);
        let pairs = generate_positive_pairs(&u, &all_types(), same);
        let mut expected = 0;
        for f in &u {
            let n = |m: &str| f.members[m].len();
            if same {
                expected += f.members.values().map(|v| v.len() * (v.len() - 1) / 2).sum::<usize>();
            }
            expected += n("dad") * (n("son") + n("girl")) + n("mom") * (n("son") + n("girl")) + n("son") * n("girl");
        }
        prop_assert_eq!(pairs.len(), expected);
        prop_assert!(pairs.windows(2).all(|w| (&w[0].id_a, &w[0].id_b) <= (&w[1].id_a, &w[1].id_b)));
    }

    #[test]
    fn percentile_is_nearest_rank(values in prop::collection::vec(-1.0f64..1.0, 1..30), p in 0.5f64..=100.0) {
        prop_assert_eq!(nearest_rank_percentile(&values, p).unwrap(), nearest_rank_oracle(&values, p));
    }

    #[test]
    fn fused_tracks_are_unit(seed in 0u64..10_000, n in 1usize..10) {
        let mut r = rng(seed);
        let frames: Vec<Embedding> = (0..n).map(|i| Embedding::new(format!("f{i}"), gaussian(&mut r, 5, 1.0))).collect();
        let v = fuse_track(&frames).unwrap().vec;
        prop_assert!((v.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-9);
    }
}
