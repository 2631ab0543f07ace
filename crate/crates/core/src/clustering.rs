//! Partition-level semi-supervised spherical K-means and partition agreement
//! measures.
//!
//! The solver works on an augmented matrix whose rows join an instance's unit
//! feature vector with its one-hot side-information row (all zeros for
//! unlabeled instances). Each centroid keeps two parts: the mean feature row
//! over all members and the mean label row over labeled members only. A point
//! pays cosine distance to the feature part, and labeled points additionally
//! pay `lambda` times the squared Euclidean distance between their label row
//! and the label part. Minimizing the label term over partitions is the same
//! as maximizing category utility against the side information.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedding::{dot, l2_norm, l2_normalize, Dataset, ZERO_NORM_TOL};
use crate::error::{Error, Result};

/// A labeling of `n` instances into clusters `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidPartition("cluster count must be at least 1".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidPartition(format!("label {bad} outside 0..{k}")));
        }
        Ok(Self { labels, k })
    }

    /// Uses `max(label) + 1` as the cluster count.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(1, |m| m + 1);
        Self::new(labels, k)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The sub-partition over `rows`, keeping the cluster count.
    pub fn restrict(&self, rows: &[usize]) -> Result<Self> {
        let labels = rows
            .iter()
            .map(|&r| {
                self.labels.get(r).copied().ok_or_else(|| {
                    Error::InvalidPartition(format!("row {r} outside partition of {}", self.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { labels, k: self.k })
    }

    /// Number of members in each cluster.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Pre-labeled instances: a one-hot `n' x K'` matrix stored as class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideInfo {
    member_rows: Vec<usize>,
    classes: Vec<usize>,
    k_prime: usize,
}

impl SideInfo {
    pub fn new(member_rows: Vec<usize>, classes: Vec<usize>, k_prime: usize) -> Result<Self> {
        if member_rows.len() != classes.len() {
            return Err(Error::LengthMismatch {
                left: member_rows.len(),
                right: classes.len(),
            });
        }
        if k_prime == 0 && !member_rows.is_empty() {
            return Err(Error::InvalidSideInfo("K' must be at least 1".into()));
        }
        let mut seen = HashSet::with_capacity(member_rows.len());
        for &r in &member_rows {
            if !seen.insert(r) {
                return Err(Error::InvalidSideInfo(format!("row {r} labeled twice")));
            }
        }
        if let Some(&bad) = classes.iter().find(|&&c| c >= k_prime) {
            return Err(Error::InvalidSideInfo(format!("class {bad} outside 0..{k_prime}")));
        }
        Ok(Self {
            member_rows,
            classes,
            k_prime,
        })
    }

    /// Uses `max(class) + 1` as `K'`.
    pub fn from_labels(member_rows: Vec<usize>, classes: Vec<usize>) -> Result<Self> {
        let k_prime = classes.iter().max().map_or(0, |m| m + 1);
        Self::new(member_rows, classes, k_prime)
    }

    /// No labeled instances; the solver reduces to spherical K-means.
    pub fn empty() -> Self {
        Self {
            member_rows: Vec::new(),
            classes: Vec::new(),
            k_prime: 0,
        }
    }

    pub fn member_rows(&self) -> &[usize] {
        &self.member_rows
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn k_prime(&self) -> usize {
        self.k_prime
    }

    pub fn len(&self) -> usize {
        self.member_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_rows.is_empty()
    }

    /// The dense one-hot matrix `S`.
    pub fn one_hot(&self) -> Vec<Vec<f64>> {
        self.classes
            .iter()
            .map(|&c| {
                let mut row = vec![0.0; self.k_prime];
                row[c] = 1.0;
                row
            })
            .collect()
    }

    /// The side information as a partition over its own `n'` rows.
    pub fn as_partition(&self) -> Result<Partition> {
        Partition::new(self.classes.clone(), self.k_prime.max(1))
    }

    fn check_rows(&self, n: usize) -> Result<()> {
        match self.member_rows.iter().find(|&&r| r >= n) {
            Some(r) => Err(Error::InvalidSideInfo(format!("row {r} outside dataset of {n}"))),
            None => Ok(()),
        }
    }
}

/// The feature block and label block of the augmented data matrix.
///
/// Rows keep the dataset order; `labeled_mask` marks the side-information rows.
#[derive(Debug, Clone)]
pub struct AugmentedMatrix {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Vec<f64>>,
    pub labeled_mask: Vec<bool>,
    /// Side-information class of each row, if labeled.
    pub class_of: Vec<Option<usize>>,
}

impl AugmentedMatrix {
    pub fn new(features: Vec<Vec<f64>>, side: &SideInfo) -> Result<Self> {
        let n = features.len();
        side.check_rows(n)?;
        let mut labels = vec![vec![0.0; side.k_prime()]; n];
        let mut labeled_mask = vec![false; n];
        let mut class_of = vec![None; n];
        for (&row, &class) in side.member_rows().iter().zip(side.classes()) {
            labels[row][class] = 1.0;
            labeled_mask[row] = true;
            class_of[row] = Some(class);
        }
        Ok(Self {
            features,
            labels,
            labeled_mask,
            class_of,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Two-part centroid of the augmented matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroid {
    /// Mean feature row of all members.
    pub part1: Vec<f64>,
    /// Mean label row over labeled members; zero when there are none.
    pub part2: Vec<f64>,
    pub members: usize,
    pub labeled_members: usize,
}

/// Normalized contingency matrix between a partition `H` (rows) and side
/// information `S` (columns) over the same `n'` instances.
#[derive(Debug, Clone)]
pub struct Ncm {
    counts: Vec<Vec<usize>>,
    row_totals: Vec<usize>,
    col_totals: Vec<usize>,
    total: usize,
}

impl Ncm {
    pub fn new(h: &Partition, s: &Partition) -> Result<Self> {
        if h.len() != s.len() {
            return Err(Error::LengthMismatch {
                left: h.len(),
                right: s.len(),
            });
        }
        let mut counts = vec![vec![0usize; s.k()]; h.k()];
        let mut row_totals = vec![0usize; h.k()];
        let mut col_totals = vec![0usize; s.k()];
        for (&k, &j) in h.labels().iter().zip(s.labels()) {
            counts[k][j] += 1;
            row_totals[k] += 1;
            col_totals[j] += 1;
        }
        Ok(Self {
            counts,
            row_totals,
            col_totals,
            total: h.len(),
        })
    }

    pub fn count(&self, k: usize, j: usize) -> usize {
        self.counts[k][j]
    }

    pub fn row_totals(&self) -> &[usize] {
        &self.row_totals
    }

    pub fn col_totals(&self) -> &[usize] {
        &self.col_totals
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn p(&self, k: usize, j: usize) -> f64 {
        self.counts[k][j] as f64 / self.total as f64
    }

    pub fn p_row(&self, k: usize) -> f64 {
        self.row_totals[k] as f64 / self.total as f64
    }

    pub fn p_col(&self, j: usize) -> f64 {
        self.col_totals[j] as f64 / self.total as f64
    }
}

/// Category utility `U_c(H, S)` of partition `h` against reference `s`.
///
/// Both partitions cover the same labeled instances. Empty clusters of `h`
/// contribute nothing. An empty instance set scores zero.
pub fn category_utility(s: &Partition, h: &Partition) -> Result<f64> {
    let ncm = Ncm::new(h, s)?;
    if ncm.total() == 0 {
        return Ok(0.0);
    }
    let mut within = 0.0;
    for k in 0..h.k() {
        let pk = ncm.p_row(k);
        if ncm.row_totals()[k] == 0 {
            continue;
        }
        let inner: f64 = (0..s.k()).map(|j| (ncm.p(k, j) / pk).powi(2)).sum();
        within += pk * inner;
    }
    let prior: f64 = (0..s.k()).map(|j| ncm.p_col(j).powi(2)).sum();
    Ok(within - prior)
}

/// Unnormalized residual `||S - H_S G||_F^2`: the within-cluster scatter of
/// the one-hot side rows, with `G` the per-cluster mean of those rows.
///
/// `h` partitions the full instance set; only `s.member_rows()` are read.
pub fn label_scatter(s: &SideInfo, h: &Partition) -> Result<f64> {
    let hs = h.restrict(s.member_rows())?;
    let sp = Partition::new(s.classes().to_vec(), s.k_prime().max(1))?;
    let ncm = Ncm::new(&hs, &sp)?;
    let mut explained = 0.0;
    for k in 0..hs.k() {
        let nk = ncm.row_totals()[k];
        if nk == 0 {
            continue;
        }
        let sq: usize = (0..sp.k()).map(|j| ncm.count(k, j).pow(2)).sum();
        explained += sq as f64 / nk as f64;
    }
    // each one-hot row has unit squared norm
    Ok(s.len() as f64 - explained)
}

/// `-||S~ - H_S G~||_F^2` with `S~ = S / sqrt(n')`, the side matrix under the
/// same `1/n'` weighting the contingency matrix uses.
///
/// With that weighting, category utility equals this value plus a constant
/// that depends on `S` only, so differences between candidate partitions
/// agree exactly. Returns zero for empty side information.
pub fn utility_as_distance(s: &SideInfo, h: &Partition) -> Result<f64> {
    if s.is_empty() {
        return Ok(0.0);
    }
    Ok(-label_scatter(s, h)? / s.len() as f64)
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information `2 I(a; b) / (H(a) + H(b))`.
///
/// Two single-cluster labelings agree perfectly and score 1.
pub fn nmi(a: &Partition, b: &Partition) -> Result<f64> {
    let ncm = Ncm::new(a, b)?;
    let n = ncm.total();
    if n == 0 {
        return Err(Error::EmptyInput("partition"));
    }
    let nf = n as f64;
    let ha = entropy(ncm.row_totals(), nf);
    let hb = entropy(ncm.col_totals(), nf);
    if ha + hb == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for k in 0..a.k() {
        for j in 0..b.k() {
            let c = ncm.count(k, j);
            if c == 0 {
                continue;
            }
            let pkj = c as f64 / nf;
            mi += pkj * (pkj / (ncm.p_row(k) * ncm.p_col(j))).ln();
        }
    }
    Ok((2.0 * mi / (ha + hb)).clamp(0.0, 1.0))
}

/// Solver controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SscOptions {
    pub max_iter: usize,
    /// Relative objective change below which the solver stops.
    pub tol: f64,
}

impl Default for SscOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Result of a solver run.
#[derive(Debug, Clone)]
pub struct SscFit {
    pub partition: Partition,
    pub centroids: Vec<Centroid>,
    /// Objective after each assignment + update round.
    pub objective_trace: Vec<f64>,
    /// Cosine between each instance and its own centroid's feature part.
    pub confidence: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SscFit {
    /// True when no round increased the objective beyond rounding noise.
    pub fn is_monotone(&self) -> bool {
        self.objective_trace
            .windows(2)
            .all(|w| w[1] <= w[0] + MONOTONE_SLACK * w[0].abs().max(1.0))
    }
}

/// Relative slack for the monotonicity check; absorbs summation rounding.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Semi-supervised K-means returning only the partition.
pub fn ssc_kmeans(
    data: &Dataset,
    side: &SideInfo,
    k: usize,
    lambda: f64,
    seed: u64,
    opts: SscOptions,
) -> Result<Partition> {
    ssc_kmeans_fit(data, side, k, lambda, seed, opts).map(|f| f.partition)
}

/// Semi-supervised K-means over a dataset; rows are L2-normalized first.
pub fn ssc_kmeans_fit(
    data: &Dataset,
    side: &SideInfo,
    k: usize,
    lambda: f64,
    seed: u64,
    opts: SscOptions,
) -> Result<SscFit> {
    let features = data
        .embeddings()
        .iter()
        .map(|e| l2_normalize(&e.vec))
        .collect::<Result<Vec<_>>>()?;
    SscKMeans::new(k, lambda, seed, opts).fit(features, side)
}

/// Configured solver.
#[derive(Debug, Clone, Copy)]
pub struct SscKMeans {
    pub k: usize,
    pub lambda: f64,
    pub seed: u64,
    pub opts: SscOptions,
}

impl SscKMeans {
    pub fn new(k: usize, lambda: f64, seed: u64, opts: SscOptions) -> Self {
        Self {
            k,
            lambda,
            seed,
            opts,
        }
    }

    fn validate(&self, n: usize, side: &SideInfo) -> Result<()> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.k == 0 || self.k < side.k_prime() || self.k > n {
            return Err(Error::InvalidK(format!(
                "K = {} with K' = {} and n = {n}; need K' <= K <= n and K >= 1",
                self.k,
                side.k_prime()
            )));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidHyperparameters(format!(
                "lambda must be a finite nonnegative number, got {}",
                self.lambda
            )));
        }
        if self.opts.max_iter == 0 || self.opts.tol.is_nan() || self.opts.tol < 0.0 {
            return Err(Error::InvalidHyperparameters("max_iter >= 1 and tol >= 0 required".into()));
        }
        side.check_rows(n)
    }

    /// Initial centroids: one per side-information class that has labeled
    /// members (mean of its features, one-hot label part), then greedy
    /// farthest-point picks in cosine distance. Without side information the
    /// first pick is drawn uniformly under the seed.
    pub fn initial_centroids(&self, aug: &AugmentedMatrix) -> Vec<Centroid> {
        let n = aug.len();
        let m = aug.features.first().map_or(0, Vec::len);
        let kp = aug.labels.first().map_or(0, Vec::len);
        let mut centroids = Vec::with_capacity(self.k);

        for class in 0..kp {
            let rows: Vec<usize> = (0..n).filter(|&i| aug.class_of[i] == Some(class)).collect();
            if rows.is_empty() {
                continue;
            }
            let mut part1 = vec![0.0; m];
            for &i in &rows {
                add_into(&mut part1, &aug.features[i]);
            }
            scale(&mut part1, 1.0 / rows.len() as f64);
            let mut part2 = vec![0.0; kp];
            part2[class] = 1.0;
            centroids.push(Centroid {
                part1,
                part2,
                members: rows.len(),
                labeled_members: rows.len(),
            });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut nearest = vec![f64::INFINITY; n];
        let mut taken = vec![false; n];
        for c in &centroids {
            update_nearest(&mut nearest, &aug.features, &c.part1);
        }
        if centroids.is_empty() {
            let first = rng.random_range(0..n);
            centroids.push(point_centroid(aug, first));
            taken[first] = true;
            update_nearest(&mut nearest, &aug.features, &aug.features[first]);
        }
        while centroids.len() < self.k {
            // farthest remaining point; equal distances resolved by a seeded draw
            let best = (0..n)
                .filter(|&i| !taken[i])
                .map(|i| nearest[i])
                .fold(f64::NEG_INFINITY, f64::max);
            let ties: Vec<usize> = (0..n).filter(|&i| !taken[i] && nearest[i] == best).collect();
            let pick = ties[rng.random_range(0..ties.len())];
            taken[pick] = true;
            let mut c = point_centroid(aug, pick);
            c.part2 = vec![0.0; kp];
            c.labeled_members = 0;
            update_nearest(&mut nearest, &aug.features, &c.part1);
            centroids.push(c);
        }
        centroids
    }

    /// Runs the solver on unit-norm feature rows.
    pub fn fit(&self, features: Vec<Vec<f64>>, side: &SideInfo) -> Result<SscFit> {
        self.validate(features.len(), side)?;
        let dim = features[0].len();
        if let Some(bad) = features.iter().find(|f| f.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        let aug = AugmentedMatrix::new(features, side)?;
        let mut centroids = self.initial_centroids(&aug);

        let mut labels: Vec<usize> = assign_all(&aug, &centroids, self.lambda, None);
        let mut trace = Vec::new();
        let mut converged = false;
        let mut iterations = 0;

        for iter in 0..self.opts.max_iter {
            iterations = iter + 1;
            if iter > 0 {
                let next = assign_all(&aug, &centroids, self.lambda, Some(&labels));
                let changed = next != labels;
                labels = next;
                if !changed {
                    converged = true;
                    break;
                }
            }
            repair_empty(&aug, &centroids, &mut labels, self.k, self.lambda);
            centroids = update_centroids(&aug, &labels, self.k);
            let obj = objective(&aug, &centroids, &labels, self.lambda);
            if let Some(&prev) = trace.last() {
                let prev: f64 = prev;
                debug_assert!(
                    obj <= prev + MONOTONE_SLACK * prev.abs().max(1.0),
                    "objective increased: {prev} -> {obj}"
                );
                trace.push(obj);
                if (prev - obj).abs() <= self.opts.tol * prev.abs().max(f64::MIN_POSITIVE) {
                    converged = true;
                    break;
                }
            } else {
                trace.push(obj);
            }
        }

        let confidence = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| cosine_to(&aug.features[i], &centroids[l].part1))
            .collect();
        Ok(SscFit {
            partition: Partition::new(labels, self.k)?,
            centroids,
            objective_trace: trace,
            confidence,
            iterations,
            converged,
        })
    }
}

/// Objective of a given partition: centroids are recomputed from it.
pub fn ssc_objective(
    features: &[Vec<f64>],
    side: &SideInfo,
    partition: &Partition,
    lambda: f64,
) -> Result<f64> {
    if partition.len() != features.len() {
        return Err(Error::LengthMismatch {
            left: partition.len(),
            right: features.len(),
        });
    }
    let aug = AugmentedMatrix::new(features.to_vec(), side)?;
    let centroids = update_centroids(&aug, partition.labels(), partition.k());
    Ok(objective(&aug, &centroids, partition.labels(), lambda))
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += x;
    }
}

fn scale(v: &mut [f64], s: f64) {
    v.iter_mut().for_each(|x| *x *= s);
}

fn cosine_to(unit_x: &[f64], centroid: &[f64]) -> f64 {
    let norm = l2_norm(centroid);
    if norm <= ZERO_NORM_TOL {
        return 0.0;
    }
    (dot(unit_x, centroid) / norm).clamp(-1.0, 1.0)
}

fn point_centroid(aug: &AugmentedMatrix, i: usize) -> Centroid {
    Centroid {
        part1: aug.features[i].clone(),
        part2: aug.labels[i].clone(),
        members: 1,
        labeled_members: usize::from(aug.labeled_mask[i]),
    }
}

fn update_nearest(nearest: &mut [f64], features: &[Vec<f64>], centre: &[f64]) {
    for (d, x) in nearest.iter_mut().zip(features) {
        *d = d.min(1.0 - cosine_to(x, centre));
    }
}

/// Precomputed per-centroid quantities for the distance function.
struct CentroidView {
    unit: Option<Vec<f64>>,
    part2: Vec<f64>,
    part2_sq: f64,
}

fn views(centroids: &[Centroid]) -> Vec<CentroidView> {
    centroids
        .iter()
        .map(|c| {
            let norm = l2_norm(&c.part1);
            CentroidView {
                unit: (norm > ZERO_NORM_TOL).then(|| c.part1.iter().map(|x| x / norm).collect()),
                part2: c.part2.clone(),
                part2_sq: dot(&c.part2, &c.part2),
            }
        })
        .collect()
}

fn point_cost(aug: &AugmentedMatrix, i: usize, v: &CentroidView, lambda: f64) -> f64 {
    let cos = v.unit.as_ref().map_or(0.0, |u| dot(&aug.features[i], u).clamp(-1.0, 1.0));
    let mut cost = 1.0 - cos;
    if let Some(class) = aug.class_of[i] {
        // ||e_c - m||^2 = 1 - 2 m_c + ||m||^2
        cost += lambda * (1.0 - 2.0 * v.part2[class] + v.part2_sq).max(0.0);
    }
    cost
}

/// Assigns every point to its cheapest centroid. With `current`, a point only
/// moves when another centroid is strictly cheaper.
fn assign_all(
    aug: &AugmentedMatrix,
    centroids: &[Centroid],
    lambda: f64,
    current: Option<&[usize]>,
) -> Vec<usize> {
    let views = views(centroids);
    (0..aug.len())
        .into_par_iter()
        .map(|i| {
            let start = current.map_or(0, |c| c[i]);
            let mut best = start;
            let mut best_cost = point_cost(aug, i, &views[start], lambda);
            for (k, v) in views.iter().enumerate() {
                let c = point_cost(aug, i, v, lambda);
                if c < best_cost {
                    best = k;
                    best_cost = c;
                }
            }
            best
        })
        .collect()
}

/// Moves the costliest point of a multi-member cluster into each empty one.
fn repair_empty(
    aug: &AugmentedMatrix,
    centroids: &[Centroid],
    labels: &mut [usize],
    k: usize,
    lambda: f64,
) {
    let views = views(centroids);
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut worst: Option<(usize, f64)> = None;
        for (i, &l) in labels.iter().enumerate() {
            if sizes[l] < 2 {
                continue;
            }
            let c = point_cost(aug, i, &views[l], lambda);
            if worst.is_none_or(|(_, wc)| c > wc) {
                worst = Some((i, c));
            }
        }
        match worst {
            Some((i, _)) => labels[i] = empty,
            None => return,
        }
    }
}

fn update_centroids(aug: &AugmentedMatrix, labels: &[usize], k: usize) -> Vec<Centroid> {
    let m = aug.features.first().map_or(0, Vec::len);
    let kp = aug.labels.first().map_or(0, Vec::len);
    let mut out: Vec<Centroid> = (0..k)
        .map(|_| Centroid {
            part1: vec![0.0; m],
            part2: vec![0.0; kp],
            members: 0,
            labeled_members: 0,
        })
        .collect();
    for (i, &l) in labels.iter().enumerate() {
        let c = &mut out[l];
        add_into(&mut c.part1, &aug.features[i]);
        c.members += 1;
        if aug.labeled_mask[i] {
            add_into(&mut c.part2, &aug.labels[i]);
            c.labeled_members += 1;
        }
    }
    for c in &mut out {
        if c.members > 0 {
            scale(&mut c.part1, 1.0 / c.members as f64);
        }
        if c.labeled_members > 0 {
            scale(&mut c.part2, 1.0 / c.labeled_members as f64);
        }
    }
    out
}

fn objective(aug: &AugmentedMatrix, centroids: &[Centroid], labels: &[usize], lambda: f64) -> f64 {
    let views = views(centroids);
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| point_cost(aug, i, &views[l], lambda))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(labels: &[usize]) -> Partition {
        Partition::from_labels(labels.to_vec()).unwrap()
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![0, 2], 2).is_err());
        assert!(Partition::new(vec![], 0).is_err());
        assert_eq!(part(&[0, 2, 1]).k(), 3);
        assert_eq!(part(&[0, 0, 1]).sizes(), vec![2, 1]);
    }

    #[test]
    fn side_info_validation() {
        assert!(SideInfo::new(vec![0, 0], vec![0, 1], 2).is_err());
        assert!(SideInfo::new(vec![0, 1], vec![0, 2], 2).is_err());
        assert!(SideInfo::new(vec![0], vec![0, 1], 2).is_err());
        let s = SideInfo::from_labels(vec![3, 1], vec![1, 0]).unwrap();
        assert_eq!(s.k_prime(), 2);
        for row in s.one_hot() {
            assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn utility_of_balanced_match() {
        let s = part(&[0, 0, 0, 0, 1, 1, 1, 1]);
        let u = category_utility(&s, &s).unwrap();
        assert!((u - 0.5).abs() < 1e-15);
    }

    #[test]
    fn utility_single_class_is_zero() {
        let s = Partition::new(vec![0; 6], 1).unwrap();
        for h in [part(&[0, 1, 2, 0, 1, 2]), part(&[0, 0, 0, 0, 0, 1])] {
            assert!(category_utility(&s, &h).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn utility_length_mismatch() {
        assert!(matches!(
            category_utility(&part(&[0, 1]), &part(&[0])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn scatter_of_single_cluster_is_total_scatter() {
        // S rows: e0, e0, e1, e1 -> column means [0.5, 0.5]; each row is
        // sqrt(0.5) from the mean, so total scatter is 4 * 0.5 = 2
        let s = SideInfo::from_labels(vec![0, 1, 2, 3], vec![0, 0, 1, 1]).unwrap();
        let h = Partition::new(vec![0; 4], 1).unwrap();
        assert!((label_scatter(&s, &h).unwrap() - 2.0).abs() < 1e-15);
        assert!((utility_as_distance(&s, &h).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn identical_rows_have_zero_residual() {
        let s = SideInfo::from_labels(vec![0, 1, 2], vec![1, 1, 1]).unwrap();
        for h in [part(&[0, 0, 0]), part(&[0, 1, 2]), part(&[1, 0, 1])] {
            assert_eq!(label_scatter(&s, &h).unwrap(), 0.0);
        }
    }

    #[test]
    fn nmi_examples() {
        let a = part(&[0, 0, 1, 1, 2, 2]);
        assert!((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let relabeled = part(&[2, 2, 0, 0, 1, 1]);
        assert!((nmi(&a, &relabeled).unwrap() - 1.0).abs() < 1e-12);
        let flat = Partition::new(vec![0; 6], 1).unwrap();
        assert_eq!(nmi(&a, &flat).unwrap(), 0.0);
        assert_eq!(nmi(&flat, &flat).unwrap(), 1.0);
        assert!(nmi(&a, &part(&[0, 1])).is_err());
    }

    #[test]
    fn nmi_small_table() {
        // a = [0,0,1,1], b = [0,1,1,1]
        // H(a) = ln 2; H(b) = -(1/4 ln 1/4 + 3/4 ln 3/4)
        // I = 1/4 ln 2 + 1/4 ln(2/3) + 1/2 ln(4/3)
        let ha = 2f64.ln();
        let hb = -(0.25 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        let mi = 0.25 * 2f64.ln() + 0.25 * (2.0f64 / 3.0).ln() + 0.5 * (4.0f64 / 3.0).ln();
        let expected = 2.0 * mi / (ha + hb);
        let got = nmi(&part(&[0, 0, 1, 1]), &part(&[0, 1, 1, 1])).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    fn unit(v: &[f64]) -> Vec<f64> {
        l2_normalize(v).unwrap()
    }

    #[test]
    fn solver_rejects_bad_config() {
        let f = vec![unit(&[1.0, 0.0]), unit(&[0.0, 1.0])];
        let side = SideInfo::from_labels(vec![0, 1], vec![0, 1]).unwrap();
        let opts = SscOptions::default();
        assert!(matches!(SscKMeans::new(1, 1.0, 0, opts).fit(f.clone(), &side), Err(Error::InvalidK(_))));
        assert!(matches!(SscKMeans::new(3, 1.0, 0, opts).fit(f.clone(), &side), Err(Error::InvalidK(_))));
        assert!(matches!(
            SscKMeans::new(2, -1.0, 0, opts).fit(f.clone(), &side),
            Err(Error::InvalidHyperparameters(_))
        ));
        assert!(matches!(SscKMeans::new(1, 1.0, 0, opts).fit(vec![], &SideInfo::empty()), Err(Error::EmptyDataset)));
        let far = SideInfo::from_labels(vec![5], vec![0]).unwrap();
        assert!(matches!(SscKMeans::new(2, 1.0, 0, opts).fit(f, &far), Err(Error::InvalidSideInfo(_))));
    }

    #[test]
    fn zero_labeled_cluster_has_zero_label_part() {
        let f = vec![
            unit(&[1.0, 0.0]),
            unit(&[0.9, 0.1]),
            unit(&[0.0, 1.0]),
            unit(&[0.1, 0.9]),
        ];
        let side = SideInfo::from_labels(vec![0], vec![0]).unwrap();
        let fit = SscKMeans::new(2, 1.0, 0, SscOptions::default()).fit(f, &side).unwrap();
        let l = fit.partition.labels();
        assert_eq!(l[0], l[1]);
        assert_eq!(l[2], l[3]);
        assert_ne!(l[0], l[2]);
        let other = &fit.centroids[l[2]];
        assert_eq!(other.labeled_members, 0);
        assert_eq!(other.part2, vec![0.0]);
        assert!(fit.is_monotone());
    }

    #[test]
    fn empty_clusters_are_repaired() {
        // four identical points and K = 3
        let f = vec![unit(&[1.0, 1.0]); 4];
        let fit = SscKMeans::new(3, 1.0, 7, SscOptions::default())
            .fit(f, &SideInfo::empty())
            .unwrap();
        assert!(fit.partition.sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn solver_is_deterministic() {
        let f: Vec<Vec<f64>> = (0..30)
            .map(|i| unit(&[(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos(), 0.3]))
            .collect();
        let side = SideInfo::from_labels(vec![0, 5, 9], vec![0, 1, 1]).unwrap();
        let run = || SscKMeans::new(4, 0.5, 11, SscOptions::default()).fit(f.clone(), &side).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.partition, b.partition);
        assert_eq!(a.objective_trace, b.objective_trace);
    }
}
