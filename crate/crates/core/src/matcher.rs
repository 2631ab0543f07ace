//! Pairwise decisions and probe-by-reference score matrices.

use rayon::prelude::*;

use crate::embedding::cosine_similarity;
use crate::error::{Error, Result};

/// Acceptance threshold on a cosine score.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() || !(-1.0..=1.0).contains(&theta) {
            return Err(Error::InvalidThreshold(theta));
        }
        Ok(Self(theta))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Accept (KIN / genuine) iff `score > theta`.
pub fn match_decision(score: f64, theta: Threshold) -> bool {
    score > theta.0
}

/// Row-major matrix of cosine scores, one row per probe sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl ScoreMatrix {
    /// Builds a matrix from row vectors; every entry must lie in `[-1, 1]`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite() || !(-1.0..=1.0).contains(v)) {
                return Err(Error::NonFinite("score matrix entry"));
            }
            values.extend(row);
        }
        Ok(Self {
            rows: n_rows,
            cols: n_cols,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.cols)
    }

    pub fn transpose(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                values.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            values,
        }
    }

    /// Mean of each row, i.e. one pooled score per probe sample.
    pub fn row_means(&self) -> Vec<f64> {
        self.row_iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect()
    }
}

/// Cosine score of every probe against every reference.
///
/// Rows are computed in parallel; each entry depends only on its own pair so
/// the result matches a sequential double loop exactly.
pub fn score_matrix<P, R>(probe: &[P], reference: &[R]) -> Result<ScoreMatrix>
where
    P: AsRef<[f64]> + Sync,
    R: AsRef<[f64]> + Sync,
{
    if probe.is_empty() || reference.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let rows = probe
        .par_iter()
        .map(|p| {
            reference
                .iter()
                .map(|r| cosine_similarity(p.as_ref(), r.as_ref()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    ScoreMatrix::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn th(v: f64) -> Threshold {
        Threshold::new(v).unwrap()
    }

    #[test]
    fn decision_examples() {
        assert!(match_decision(0.5, th(0.2)));
        assert!(!match_decision(0.2, th(0.2)));
        assert!(!match_decision(-0.1, th(0.2)));
    }

    #[test]
    fn threshold_validation() {
        assert!(Threshold::new(f64::NAN).is_err());
        assert!(Threshold::new(1.5).is_err());
        assert_eq!(Threshold::new(-1.0).unwrap().value(), -1.0);
    }

    #[test]
    fn matrix_examples() {
        let m = score_matrix(&[vec![0.0, 1.0]], &[vec![0.0, 1.0]]).unwrap();
        assert_eq!((m.rows(), m.cols(), m.get(0, 0)), (1, 1, 1.0));

        let basis = [vec![1.0, 0.0], vec![0.0, 1.0]];
        let m = score_matrix(&basis, &basis).unwrap();
        assert_eq!(m.row(0), &[1.0, 0.0]);
        assert_eq!(m.row(1), &[0.0, 1.0]);

        assert!(matches!(
            score_matrix(&[vec![1.0, 0.0]], &[vec![1.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
        let empty: [Vec<f64>; 0] = [];
        assert!(matches!(score_matrix(&empty, &basis), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn matrix_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut unit = |d: usize| {
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            crate::embedding::l2_normalize(&v).unwrap()
        };
        let probes: Vec<_> = (0..3).map(|_| unit(5)).collect();
        let refs: Vec<_> = (0..2).map(|_| unit(5)).collect();
        let m = score_matrix(&probes, &refs).unwrap();
        for (i, p) in probes.iter().enumerate() {
            for (j, r) in refs.iter().enumerate() {
                let dot: f64 = p.iter().zip(r).map(|(a, b)| a * b).sum();
                let np = p.iter().map(|a| a * a).sum::<f64>().sqrt();
                let nr = r.iter().map(|a| a * a).sum::<f64>().sqrt();
                assert!((m.get(i, j) - dot / (np * nr)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn row_means_pool_per_probe() {
        let m = ScoreMatrix::from_rows(vec![vec![0.2, 0.4], vec![1.0, -1.0]]).unwrap();
        assert_eq!(m.row_means(), vec![0.30000000000000004, 0.0]);
    }

    proptest! {
        #[test]
        fn transpose_symmetry(
            a in prop::collection::vec(prop::collection::vec(0.1f64..1.0, 4), 1..5),
            b in prop::collection::vec(prop::collection::vec(-1.0f64..-0.1, 4), 1..5),
        ) {
            let ab = score_matrix(&a, &b).unwrap();
            let ba = score_matrix(&b, &a).unwrap().transpose();
            for i in 0..ab.rows() {
                for j in 0..ab.cols() {
                    prop_assert!((ab.get(i, j) - ba.get(i, j)).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn decision_is_monotone(s1 in -1.0f64..1.0, s2 in -1.0f64..1.0, t in -1.0f64..1.0) {
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            if match_decision(lo, th(t)) {
                prop_assert!(match_decision(hi, th(t)));
            }
        }
    }
}
