//! Benchmark metrics: verification rates and thresholds, DET curves,
//! per-subgroup threshold analysis, retrieval (AP, MAP, CMC), tri-subject
//! scoring and classification summaries.
//!
//! Acceptance is always strict (`score > theta`), matching
//! [`crate::matcher::match_decision`]. Curves report exact step values.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Display;
use std::hash::Hash;

use serde::Serialize;

use crate::dataset::{PairLabel, Relation, Template};
use crate::embedding::{cosine_similarity, mean_direction};
use crate::error::{Error, Result};

/// One scored comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub score: f64,
    pub label: PairLabel,
    pub rel: Option<Relation>,
    pub subgroup: Option<String>,
}

impl ScoredPair {
    pub fn new(score: f64, label: PairLabel) -> Self {
        Self {
            score,
            label,
            rel: None,
            subgroup: None,
        }
    }

    pub fn with_rel(mut self, rel: Relation) -> Self {
        self.rel = Some(rel);
        self
    }

    pub fn with_subgroup(mut self, subgroup: impl Into<String>) -> Self {
        self.subgroup = Some(subgroup.into());
        self
    }
}

/// Scores with their KIN / NON-KIN labels and optional type and subgroup tags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredPairSet {
    pairs: Vec<ScoredPair>,
}

impl ScoredPairSet {
    /// Every score must be a finite cosine in `[-1, 1]`.
    pub fn new(pairs: Vec<ScoredPair>) -> Result<Self> {
        if pairs.iter().any(|p| !p.score.is_finite() || !(-1.0..=1.0).contains(&p.score)) {
            return Err(Error::NonFinite("pair score"));
        }
        Ok(Self { pairs })
    }

    pub fn from_scores(genuine: &[f64], imposter: &[f64]) -> Result<Self> {
        let pairs = genuine
            .iter()
            .map(|&s| ScoredPair::new(s, PairLabel::Kin))
            .chain(imposter.iter().map(|&s| ScoredPair::new(s, PairLabel::NonKin)))
            .collect();
        Self::new(pairs)
    }

    pub fn pairs(&self) -> &[ScoredPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn genuine_scores(&self) -> Vec<f64> {
        self.scores_with(PairLabel::Kin)
    }

    pub fn imposter_scores(&self) -> Vec<f64> {
        self.scores_with(PairLabel::NonKin)
    }

    fn scores_with(&self, label: PairLabel) -> Vec<f64> {
        self.pairs.iter().filter(|p| p.label == label).map(|p| p.score).collect()
    }

    fn subset<F: Fn(&ScoredPair) -> bool>(&self, keep: F) -> Self {
        Self {
            pairs: self.pairs.iter().filter(|p| keep(p)).cloned().collect(),
        }
    }
}

/// Confusion counts and rates at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rates {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub far: f64,
    pub fnr: f64,
    pub tar: f64,
    pub accuracy: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Rates {
    /// Builds rates from counts. `tar` is defined as `1 - fnr`.
    pub fn from_counts(threshold: f64, tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let fnr = ratio(fn_, fn_ + tp);
        Self {
            threshold,
            tp,
            fp,
            tn,
            fn_,
            far: ratio(fp, fp + tn),
            fnr,
            tar: 1.0 - fnr,
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
        }
    }
}

/// Genuine and imposter scores sorted ascending, for O(log n) counting.
struct SortedScores {
    genuine: Vec<f64>,
    imposter: Vec<f64>,
}

impl SortedScores {
    fn new(pairs: &ScoredPairSet) -> Self {
        let mut genuine = pairs.genuine_scores();
        let mut imposter = pairs.imposter_scores();
        genuine.sort_by(f64::total_cmp);
        imposter.sort_by(f64::total_cmp);
        Self { genuine, imposter }
    }

    fn above(sorted: &[f64], theta: f64) -> usize {
        sorted.len() - sorted.partition_point(|&s| s <= theta)
    }

    fn rates(&self, theta: f64) -> Rates {
        let tp = Self::above(&self.genuine, theta);
        let fp = Self::above(&self.imposter, theta);
        Rates::from_counts(theta, tp, fp, self.imposter.len() - fp, self.genuine.len() - tp)
    }

    /// Distinct scores across both labels, ascending.
    fn unique(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.genuine.iter().chain(&self.imposter).copied().collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }

    fn check_both(&self) -> Result<()> {
        if self.genuine.is_empty() || self.imposter.is_empty() {
            return Err(Error::DegenerateLabels(String::new()));
        }
        Ok(())
    }
}

/// Counts and rates when accepting every pair with `score > theta`.
pub fn rates_at_threshold(pairs: &ScoredPairSet, theta: f64) -> Result<Rates> {
    if pairs.is_empty() {
        return Err(Error::EmptySet);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for p in pairs.pairs() {
        match (p.label.is_kin(), p.score > theta) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(Rates::from_counts(theta, tp, fp, tn, fn_))
}

/// Accuracy-maximizing threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalThreshold {
    pub theta: f64,
    pub accuracy: f64,
}

/// Scans every distinct score as a candidate threshold and returns the
/// smallest one reaching the highest accuracy.
pub fn optimal_threshold(pairs: &ScoredPairSet) -> Result<OptimalThreshold> {
    let sorted = SortedScores::new(pairs);
    sorted.check_both()?;
    let n = pairs.len();
    let mut best: Option<(f64, usize)> = None;
    for theta in sorted.unique() {
        let r = sorted.rates(theta);
        let correct = r.tp + r.tn;
        if best.is_none_or(|(_, c)| correct > c) {
            best = Some((theta, correct));
        }
    }
    let (theta, correct) = best.expect("nonempty candidate set");
    Ok(OptimalThreshold {
        theta,
        accuracy: ratio(correct, n),
    })
}

/// Accuracy of one relationship type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypeAccuracy {
    pub theta: f64,
    pub pairs: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeAccuracyReport {
    pub per_type: BTreeMap<String, TypeAccuracy>,
    /// Pair-count weighted mean of per-type accuracies.
    pub average: f64,
}

/// Accuracy per relationship type at that type's threshold, plus the
/// pair-count weighted average.
pub fn verification_accuracy_by_type(
    pairs: &ScoredPairSet,
    thetas: &BTreeMap<Relation, f64>,
) -> Result<TypeAccuracyReport> {
    if pairs.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut per: BTreeMap<Relation, (f64, usize, usize)> = BTreeMap::new();
    for (i, p) in pairs.pairs().iter().enumerate() {
        let rel = p.rel.ok_or(Error::MissingType(i))?;
        let theta = *thetas.get(&rel).ok_or(Error::MissingType(i))?;
        let entry = per.entry(rel).or_insert((theta, 0, 0));
        entry.1 += 1;
        if (p.score > theta) == p.label.is_kin() {
            entry.2 += 1;
        }
    }
    let total: usize = per.values().map(|v| v.1).sum();
    let weighted: f64 = per
        .values()
        .map(|&(_, n, c)| n as f64 * ratio(c, n))
        .sum::<f64>()
        / total as f64;
    Ok(TypeAccuracyReport {
        per_type: per
            .into_iter()
            .map(|(rel, (theta, n, c))| {
                (
                    rel.to_string(),
                    TypeAccuracy {
                        theta,
                        pairs: n,
                        correct: c,
                        accuracy: ratio(c, n),
                    },
                )
            })
            .collect(),
        average: weighted,
    })
}

/// Smallest distinct imposter score whose false-accept rate is at most `target_far`.
pub fn threshold_for_far(imposter_scores: &[f64], target_far: f64) -> Result<f64> {
    if imposter_scores.is_empty() {
        return Err(Error::EmptySet);
    }
    if !(target_far > 0.0 && target_far < 1.0) {
        return Err(Error::InvalidTarget(target_far));
    }
    let mut sorted = imposter_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut unique = sorted.clone();
    unique.dedup();
    for theta in unique {
        let fp = SortedScores::above(&sorted, theta);
        if fp as f64 / n <= target_far {
            return Ok(theta);
        }
    }
    // at the largest score nothing is accepted
    Err(Error::UnreachableTarget(target_far))
}

/// TAR at a requested FAR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TarAtFar {
    pub target: f64,
    pub theta: f64,
    pub far: f64,
    pub tar: f64,
}

pub fn tar_at_far(pairs: &ScoredPairSet, targets: &[f64]) -> Result<Vec<TarAtFar>> {
    let imposters = pairs.imposter_scores();
    targets
        .iter()
        .map(|&target| {
            let theta = threshold_for_far(&imposters, target)?;
            let r = rates_at_threshold(pairs, theta)?;
            Ok(TarAtFar {
                target,
                theta,
                far: r.far,
                tar: r.tar,
            })
        })
        .collect()
}

/// One step point of a DET / ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub threshold: f64,
    pub far: f64,
    pub fnr: f64,
    pub tar: f64,
    pub accuracy: f64,
}

impl From<Rates> for RatePoint {
    fn from(r: Rates) -> Self {
        Self {
            threshold: r.threshold,
            far: r.far,
            fnr: r.fnr,
            tar: r.tar,
            accuracy: r.accuracy,
        }
    }
}

/// Rate points sorted by ascending threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
}

impl RateCurve {
    /// Checks ordering and the step-function invariants.
    pub fn is_consistent(&self) -> bool {
        self.points.windows(2).all(|w| {
            w[0].threshold < w[1].threshold && w[1].far <= w[0].far && w[1].tar <= w[0].tar
        }) && self.points.iter().all(|p| p.tar == 1.0 - p.fnr)
    }
}

/// Exact DET curve: the `-inf` endpoint (accept all), one point per distinct
/// score, and the `+inf` endpoint (accept none). The point at the largest
/// score already accepts nothing and is folded into the `+inf` endpoint.
pub fn det_curve(pairs: &ScoredPairSet) -> Result<RateCurve> {
    let sorted = SortedScores::new(pairs);
    sorted.check_both()?;
    let unique = sorted.unique();
    let mut points = Vec::with_capacity(unique.len() + 1);
    points.push(sorted.rates(f64::NEG_INFINITY).into());
    for &theta in &unique[..unique.len() - 1] {
        points.push(sorted.rates(theta).into());
    }
    points.push(sorted.rates(f64::INFINITY).into());
    Ok(RateCurve { points })
}

/// Signed percent difference between the reported (targeted) FAR and the
/// FAR actually observed.
pub fn percent_error_far(reported: f64, actual: f64) -> Result<f64> {
    if reported.is_nan() || reported <= 0.0 {
        return Err(Error::ZeroReported);
    }
    Ok((reported - actual) / reported * 100.0)
}

/// Threshold behaviour of one subgroup.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupThresholds {
    pub pairs: usize,
    /// Threshold from the pooled imposters of all subgroups.
    pub theta_global_far: f64,
    /// Threshold from this subgroup's imposters.
    pub theta_subgroup: f64,
    pub far_at_global: f64,
    pub far_at_subgroup: f64,
    pub tar_at_global: f64,
    pub tar_at_subgroup: f64,
    pub percent_error_global: f64,
    pub percent_error_subgroup: f64,
    /// Accuracy at the pooled accuracy-optimal threshold.
    pub accuracy_at_global_optimal: f64,
    /// This subgroup's accuracy-optimal threshold and its accuracy.
    pub optimal_threshold: f64,
    pub accuracy_at_optimal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupReport {
    pub target_far: f64,
    pub theta_global_far: f64,
    pub global_optimal_threshold: f64,
    pub per_subgroup: BTreeMap<String, SubgroupThresholds>,
}

/// Compares one global threshold against per-subgroup thresholds at a target FAR.
pub fn subgroup_threshold_report(pairs: &ScoredPairSet, target_far: f64) -> Result<SubgroupReport> {
    if pairs.is_empty() {
        return Err(Error::EmptySet);
    }
    if let Some(i) = pairs.pairs().iter().position(|p| p.subgroup.is_none()) {
        return Err(Error::MissingSubgroup(i));
    }
    let groups: BTreeSet<&str> = pairs.pairs().iter().filter_map(|p| p.subgroup.as_deref()).collect();
    let theta_global = threshold_for_far(&pairs.imposter_scores(), target_far)?;
    let global_opt = optimal_threshold(pairs)?;

    let mut per_subgroup = BTreeMap::new();
    for g in groups {
        let sub = pairs.subset(|p| p.subgroup.as_deref() == Some(g));
        let sorted = SortedScores::new(&sub);
        sorted
            .check_both()
            .map_err(|_| Error::DegenerateLabels(format!(" in subgroup `{g}`")))?;
        let theta_sub = threshold_for_far(&sorted.imposter, target_far)?;
        let at_global = sorted.rates(theta_global);
        let at_sub = sorted.rates(theta_sub);
        let opt = optimal_threshold(&sub)?;
        per_subgroup.insert(
            g.to_string(),
            SubgroupThresholds {
                pairs: sub.len(),
                theta_global_far: theta_global,
                theta_subgroup: theta_sub,
                far_at_global: at_global.far,
                far_at_subgroup: at_sub.far,
                tar_at_global: at_global.tar,
                tar_at_subgroup: at_sub.tar,
                percent_error_global: percent_error_far(target_far, at_global.far)?,
                percent_error_subgroup: percent_error_far(target_far, at_sub.far)?,
                accuracy_at_global_optimal: sorted.rates(global_opt.theta).accuracy,
                optimal_threshold: opt.theta,
                accuracy_at_optimal: opt.accuracy,
            },
        );
    }
    Ok(SubgroupReport {
        target_far,
        theta_global_far: theta_global,
        global_optimal_threshold: global_opt.theta,
        per_subgroup,
    })
}

/// A probe's gallery ranking with its relevant (true-match) entries.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub probe: String,
    pub order: Vec<String>,
    pub scores: Vec<f64>,
    pub relevant: BTreeSet<String>,
}

impl RankedList {
    /// `order` must hold distinct ids, `scores` must align with it, and
    /// `relevant` must be a subset of `order`.
    pub fn new(
        probe: impl Into<String>,
        order: Vec<String>,
        scores: Vec<f64>,
        relevant: BTreeSet<String>,
    ) -> Result<Self> {
        let probe = probe.into();
        let invalid = |reason: &str| Error::InvalidRanking {
            probe: probe.clone(),
            reason: reason.to_string(),
        };
        if scores.len() != order.len() {
            return Err(invalid("scores and order differ in length"));
        }
        let ids: HashSet<&String> = order.iter().collect();
        if ids.len() != order.len() {
            return Err(invalid("gallery id repeated"));
        }
        if relevant.iter().any(|r| !ids.contains(r)) {
            return Err(invalid("relevant id missing from gallery"));
        }
        Ok(Self {
            probe,
            order,
            scores,
            relevant,
        })
    }

    /// Sorts by descending score; equal scores go by ascending gallery id.
    pub fn from_scores(
        probe: impl Into<String>,
        mut scored: Vec<(String, f64)>,
        relevant: BTreeSet<String>,
    ) -> Result<Self> {
        if scored.iter().any(|(_, s)| s.is_nan()) {
            return Err(Error::NonFinite("ranking score"));
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let (order, scores) = scored.into_iter().unzip();
        Self::new(probe, order, scores, relevant)
    }

    /// 1-based ranks of the relevant entries, ascending.
    pub fn relevant_ranks(&self) -> Vec<usize> {
        self.order
            .iter()
            .enumerate()
            .filter(|(_, id)| self.relevant.contains(*id))
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn first_hit(&self) -> Option<usize> {
        self.order.iter().position(|id| self.relevant.contains(id)).map(|i| i + 1)
    }
}

/// `AP = (1/P) * sum_t t / rank(t)` over the `P` relevant entries.
pub fn average_precision(ranked: &RankedList) -> Result<f64> {
    let ranks = ranked.relevant_ranks();
    if ranks.is_empty() {
        return Err(Error::NoRelevant(ranked.probe.clone()));
    }
    let sum: f64 = ranks
        .iter()
        .enumerate()
        .map(|(i, &r)| (i + 1) as f64 / r as f64)
        .sum();
    Ok(sum / ranks.len() as f64)
}

pub fn mean_average_precision(lists: &[RankedList]) -> Result<f64> {
    if lists.is_empty() {
        return Err(Error::EmptySet);
    }
    let aps = lists.iter().map(average_precision).collect::<Result<Vec<_>>>()?;
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Cumulative match characteristic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cmc {
    /// `curve[k - 1]` is the fraction of probes whose first relevant entry is
    /// at rank `k` or better; runs to the largest gallery size.
    pub curve: Vec<f64>,
    /// Values at the requested ranks.
    pub at: Vec<(usize, f64)>,
}

pub fn cmc(lists: &[RankedList], ranks: &[usize]) -> Result<Cmc> {
    if lists.is_empty() {
        return Err(Error::EmptySet);
    }
    let hits = lists
        .iter()
        .map(|l| l.first_hit().ok_or_else(|| Error::NoRelevant(l.probe.clone())))
        .collect::<Result<Vec<_>>>()?;
    let depth = lists.iter().map(|l| l.order.len()).max().unwrap_or(0);
    let mut hist = vec![0usize; depth + 1];
    for h in hits {
        hist[h] += 1;
    }
    let n = lists.len();
    let mut curve = Vec::with_capacity(depth);
    let mut cum = 0;
    for count in &hist[1..] {
        cum += count;
        curve.push(ratio(cum, n));
    }
    let at = ranks
        .iter()
        .map(|&k| {
            let v = match k {
                0 => 0.0,
                k if k > depth => curve.last().copied().unwrap_or(0.0),
                k => curve[k - 1],
            };
            (k, v)
        })
        .collect();
    Ok(Cmc { curve, at })
}

/// Average of father-child and mother-child cosines, each template reduced to
/// the unit mean of its media.
pub fn tri_subject_score(father: &Template, mother: &Template, child: &Template) -> Result<f64> {
    let pool = |t: &Template| {
        if t.media.is_empty() {
            return Err(Error::EmptyTemplate);
        }
        mean_direction(&t.media)
    };
    let (f, m, c) = (pool(father)?, pool(mother)?, pool(child)?);
    let fc = cosine_similarity(&f, &c)?;
    let mc = cosine_similarity(&m, &c)?;
    Ok((fc + mc) / 2.0)
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: usize = (0..self.classes.len()).map(|i| self.counts[i][i]).sum();
        ratio(diag, self.total())
    }

    /// Per-class true positives, false positives and false negatives.
    pub fn class_counts(&self, class: usize) -> ClassCounts {
        let k = self.classes.len();
        let tp = self.counts[class][class];
        let col: usize = (0..k).map(|r| self.counts[r][class]).sum();
        let row: usize = self.counts[class].iter().sum();
        ClassCounts {
            tp,
            fp: col - tp,
            fn_: row - tp,
        }
    }
}

pub fn confusion_matrix<T>(predicted: &[T], truth: &[T], classes: &[T]) -> Result<ConfusionMatrix>
where
    T: Eq + Hash + Display,
{
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    let index: HashMap<&T, usize> = classes.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let lookup = |c: &T| index.get(c).copied().ok_or_else(|| Error::UnknownClass(c.to_string()));
    let mut counts = vec![vec![0usize; classes.len()]; classes.len()];
    for (p, t) in predicted.iter().zip(truth) {
        counts[lookup(t)?][lookup(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.iter().map(ToString::to_string).collect(),
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Precision, recall and F1 of one class. A zero denominator yields 0 and
/// sets `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassPrf {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub undefined: bool,
}

impl ClassPrf {
    pub fn from_counts(class: impl Into<String>, c: ClassCounts) -> Self {
        let p_den = c.tp + c.fp;
        let r_den = c.tp + c.fn_;
        let precision = ratio(c.tp, p_den);
        let recall = ratio(c.tp, r_den);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            class: class.into(),
            precision,
            recall,
            f1,
            undefined: p_den == 0 || r_den == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrfReport {
    pub per_class: Vec<ClassPrf>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

pub fn precision_recall_f1(confusion: &ConfusionMatrix) -> PrfReport {
    let per_class: Vec<ClassPrf> = confusion
        .classes
        .iter()
        .enumerate()
        .map(|(i, c)| ClassPrf::from_counts(c.clone(), confusion.class_counts(i)))
        .collect();
    let k = per_class.len().max(1) as f64;
    let mean = |f: fn(&ClassPrf) -> f64| per_class.iter().map(f).sum::<f64>() / k;
    PrfReport {
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        per_class,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{RelationshipType, SubjectId};
    use crate::embedding::Embedding;

    fn set(genuine: &[f64], imposter: &[f64]) -> ScoredPairSet {
        ScoredPairSet::from_scores(genuine, imposter).unwrap()
    }

    #[test]
    fn rates_examples() {
        let s = set(&[0.9, 0.8], &[0.1, 0.2]);
        let r = rates_at_threshold(&s, 0.5).unwrap();
        assert_eq!((r.tar, r.far, r.accuracy), (1.0, 0.0, 1.0));
        let r = rates_at_threshold(&s, 0.95).unwrap();
        assert_eq!((r.tar, r.far), (0.0, 0.0));
        assert!(matches!(rates_at_threshold(&ScoredPairSet::default(), 0.0), Err(Error::EmptySet)));
        assert!(ScoredPairSet::from_scores(&[1.5], &[]).is_err());
    }

    #[test]
    fn optimal_threshold_examples() {
        let o = optimal_threshold(&set(&[0.9, 0.8], &[0.1, 0.2])).unwrap();
        assert_eq!((o.theta, o.accuracy), (0.2, 1.0));
        assert!(matches!(optimal_threshold(&set(&[0.9, 0.8], &[])), Err(Error::DegenerateLabels(_))));
    }

    #[test]
    fn optimal_threshold_beats_every_candidate() {
        let s = set(&[0.3, 0.5, 0.35, 0.9], &[0.4, 0.1, 0.6, 0.3, 0.2]);
        let o = optimal_threshold(&s).unwrap();
        for p in s.pairs() {
            let acc = rates_at_threshold(&s, p.score).unwrap().accuracy;
            assert!(o.accuracy >= acc);
            if acc == o.accuracy {
                assert!(o.theta <= p.score);
            }
        }
    }

    #[test]
    fn weighted_type_accuracy() {
        let fd = Relation::Kin(RelationshipType::FD);
        let ms = Relation::Kin(RelationshipType::MS);
        let mut pairs = Vec::new();
        // FD: 10 pairs all correct at theta 0
        for _ in 0..5 {
            pairs.push(ScoredPair::new(0.5, PairLabel::Kin).with_rel(fd));
            pairs.push(ScoredPair::new(-0.5, PairLabel::NonKin).with_rel(fd));
        }
        // MS: 30 pairs, half correct
        for _ in 0..15 {
            pairs.push(ScoredPair::new(0.5, PairLabel::Kin).with_rel(ms));
            pairs.push(ScoredPair::new(0.5, PairLabel::NonKin).with_rel(ms));
        }
        let s = ScoredPairSet::new(pairs).unwrap();
        let thetas = BTreeMap::from([(fd, 0.0), (ms, 0.0)]);
        let rep = verification_accuracy_by_type(&s, &thetas).unwrap();
        assert_eq!(rep.per_type["FD"].accuracy, 1.0);
        assert_eq!(rep.per_type["MS"].accuracy, 0.5);
        assert!((rep.average - 0.625).abs() < 1e-15);

        let missing = BTreeMap::from([(fd, 0.0)]);
        assert!(matches!(verification_accuracy_by_type(&s, &missing), Err(Error::MissingType(_))));
        let untyped = set(&[0.5], &[0.1]);
        assert!(matches!(verification_accuracy_by_type(&untyped, &thetas), Err(Error::MissingType(0))));
    }

    #[test]
    fn single_type_average_is_that_type() {
        let fd = Relation::Kin(RelationshipType::FD);
        let s = ScoredPairSet::new(vec![
            ScoredPair::new(0.5, PairLabel::Kin).with_rel(fd),
            ScoredPair::new(0.1, PairLabel::Kin).with_rel(fd),
            ScoredPair::new(0.0, PairLabel::NonKin).with_rel(fd),
        ])
        .unwrap();
        let rep = verification_accuracy_by_type(&s, &BTreeMap::from([(fd, 0.2)])).unwrap();
        assert_eq!(rep.average, rep.per_type["FD"].accuracy);
    }

    #[test]
    fn far_threshold_examples() {
        let imp = [0.1, 0.2, 0.3, 0.9];
        assert_eq!(threshold_for_far(&imp, 0.25).unwrap(), 0.3);
        assert_eq!(threshold_for_far(&imp, 1.0 - 1e-12).unwrap(), 0.1);
        assert_eq!(threshold_for_far(&imp, 1e-9).unwrap(), 0.9);
        assert!(matches!(threshold_for_far(&imp, 0.0), Err(Error::InvalidTarget(_))));
        assert!(matches!(threshold_for_far(&[], 0.1), Err(Error::EmptySet)));
    }

    #[test]
    fn tar_at_far_toy() {
        let s = set(&[0.5, 0.6, 0.95, 0.4], &[0.1, 0.2, 0.3, 0.9]);
        let r = tar_at_far(&s, &[0.25]).unwrap();
        // theta = 0.3 accepts every genuine score
        assert_eq!(r[0].theta, 0.3);
        assert_eq!(r[0].far, 0.25);
        assert_eq!(r[0].tar, 1.0);
        let r = tar_at_far(&s, &[1e-6]).unwrap();
        assert_eq!((r[0].theta, r[0].tar), (0.9, 0.25));
    }

    #[test]
    fn det_examples() {
        let c = det_curve(&set(&[0.9, 0.8], &[0.1, 0.2])).unwrap();
        assert!(c.is_consistent());
        assert!(c.points.iter().any(|p| p.far == 0.0 && p.fnr == 0.0));
        assert_eq!(c.points.first().unwrap().threshold, f64::NEG_INFINITY);
        assert_eq!(c.points.last().unwrap().threshold, f64::INFINITY);

        let flat = det_curve(&set(&[0.4, 0.4], &[0.4])).unwrap();
        assert_eq!(flat.points.len(), 2);
        assert!(matches!(det_curve(&set(&[0.4], &[])), Err(Error::DegenerateLabels(_))));
    }

    #[test]
    fn percent_error_examples() {
        assert!((percent_error_far(0.001, 0.002).unwrap() + 100.0).abs() < 1e-9);
        assert_eq!(percent_error_far(0.3, 0.3).unwrap(), 0.0);
        assert!((percent_error_far(0.001, 0.0005).unwrap() - 50.0).abs() < 1e-9);
        assert!(matches!(percent_error_far(0.0, 0.1), Err(Error::ZeroReported)));
    }

    #[test]
    fn subgroup_report_single_group() {
        let pairs = vec![
            ScoredPair::new(0.8, PairLabel::Kin).with_subgroup("AF"),
            ScoredPair::new(0.7, PairLabel::Kin).with_subgroup("AF"),
            ScoredPair::new(0.1, PairLabel::NonKin).with_subgroup("AF"),
            ScoredPair::new(0.3, PairLabel::NonKin).with_subgroup("AF"),
        ];
        let s = ScoredPairSet::new(pairs).unwrap();
        let rep = subgroup_threshold_report(&s, 0.4).unwrap();
        let af = &rep.per_subgroup["AF"];
        assert_eq!(af.theta_subgroup, rep.theta_global_far);
        assert_eq!(af.theta_global_far, af.theta_subgroup);

        let untagged = set(&[0.5], &[0.1]);
        assert!(matches!(subgroup_threshold_report(&untagged, 0.1), Err(Error::MissingSubgroup(0))));
        let one_label = ScoredPairSet::new(vec![
            ScoredPair::new(0.8, PairLabel::Kin).with_subgroup("AF"),
            ScoredPair::new(0.1, PairLabel::NonKin).with_subgroup("AF"),
            ScoredPair::new(0.8, PairLabel::Kin).with_subgroup("WM"),
        ])
        .unwrap();
        assert!(matches!(subgroup_threshold_report(&one_label, 0.4), Err(Error::DegenerateLabels(_))));
    }

    fn ranked(order: &[&str], relevant: &[&str]) -> RankedList {
        RankedList::new(
            "p",
            order.iter().map(|s| s.to_string()).collect(),
            vec![0.0; order.len()],
            relevant.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn ap_examples() {
        let l = ranked(&["a", "b", "c", "d"], &["a", "c"]);
        assert!((average_precision(&l).unwrap() - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision(&ranked(&["a", "b", "c"], &["a", "b"])).unwrap(), 1.0);
        let l = ranked(&["a", "b", "c", "d", "e"], &["e"]);
        assert!((average_precision(&l).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(average_precision(&ranked(&["a"], &[])), Err(Error::NoRelevant(_))));
    }

    #[test]
    fn map_and_cmc_examples() {
        let lists = vec![ranked(&["a", "b"], &["a"]), ranked(&["a", "b"], &["b"])];
        assert_eq!(mean_average_precision(&lists).unwrap(), 0.75);
        assert_eq!(mean_average_precision(&lists[..1]).unwrap(), 1.0);

        let lists = vec![
            ranked(&["a", "b", "c"], &["a"]),
            ranked(&["a", "b", "c"], &["b"]),
            ranked(&["a", "b", "c"], &["a", "c"]),
        ];
        let c = cmc(&lists, &[1, 2]).unwrap();
        assert_eq!(c.at, vec![(1, 2.0 / 3.0), (2, 1.0)]);
        assert_eq!(*c.curve.last().unwrap(), 1.0);

        let top = vec![ranked(&["a", "b"], &["a"]); 3];
        assert_eq!(cmc(&top, &[1]).unwrap().curve, vec![1.0, 1.0]);
    }

    #[test]
    fn ranking_ties_use_gallery_id() {
        let l = RankedList::from_scores(
            "p",
            vec![("b".into(), 0.5), ("c".into(), 0.9), ("a".into(), 0.5)],
            BTreeSet::from(["a".to_string()]),
        )
        .unwrap();
        assert_eq!(l.order, vec!["c", "a", "b"]);
        assert!(RankedList::new("p", vec!["a".into()], vec![0.0], BTreeSet::from(["z".to_string()])).is_err());
    }

    #[test]
    fn tri_subject_examples() {
        let t = |v: Vec<f64>| Template::new(SubjectId::new("F", "m"), vec![Embedding::new("x", v)]).unwrap();
        let s = tri_subject_score(&t(vec![1.0, 0.0]), &t(vec![0.0, 1.0]), &t(vec![1.0, 0.0])).unwrap();
        assert_eq!(s, 0.5);
        let empty = Template {
            subject: SubjectId::new("F", "m"),
            media: vec![],
        };
        assert!(matches!(
            tri_subject_score(&empty, &t(vec![1.0]), &t(vec![1.0])),
            Err(Error::EmptyTemplate)
        ));
    }

    #[test]
    fn prf_examples() {
        let p = ClassPrf::from_counts("x", ClassCounts { tp: 2, fp: 1, fn_: 1 });
        for v in [p.precision, p.recall, p.f1] {
            assert!((v - 2.0 / 3.0).abs() < 1e-15);
        }
        let truth = ["a", "b", "a", "c"];
        let cm = confusion_matrix(&truth, &truth, &["a", "b", "c"]).unwrap();
        assert_eq!(cm.counts, vec![vec![2, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        let rep = precision_recall_f1(&cm);
        assert!(rep.per_class.iter().all(|c| c.f1 == 1.0 && !c.undefined));
        assert_eq!(rep.macro_f1, 1.0);

        let pred = ["a", "b", "b", "c"];
        let cm = confusion_matrix(&pred, &truth, &["a", "b", "c"]).unwrap();
        assert_eq!(cm.counts[0][1], 1);
        assert_eq!(cm.total() - cm.counts.iter().enumerate().map(|(i, r)| r[i]).sum::<usize>(), 1);
        assert!(confusion_matrix(&["z"], &["a"], &["a"]).is_err());

        let empty_class = ClassPrf::from_counts("q", ClassCounts { tp: 0, fp: 0, fn_: 0 });
        assert!(empty_class.undefined);
        assert_eq!(empty_class.f1, 0.0);
    }
}
