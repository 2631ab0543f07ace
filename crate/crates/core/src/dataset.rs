//! Benchmark construction: families to pairs to folds, face pruning, track
//! pooling and subject templates.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{mean_direction, Embedding, Modality};
use crate::error::{Error, Result};
use crate::matcher::ScoreMatrix;

/// Default threshold for median-score face pruning.
pub const PRUNE_THETA: f64 = 0.2;
/// Default percentile for median-score face pruning.
pub const PRUNE_PERCENTILE: f64 = 50.0;
/// Default threshold for accepting a face track against labeled faces.
pub const TRACK_THETA: f64 = 0.25;
/// Default percentile of per-face mean scores used for track acceptance.
pub const TRACK_PERCENTILE: f64 = 25.0;
/// Faces sampled uniformly from a track before matching.
pub const TRACK_MAX_FACES: usize = 25;
/// Faces sampled per subject when building balanced identity pairs.
pub const FACES_PER_SUBJECT: usize = 25;

/// Caps applied when curating father-mother-child triplets: samples per
/// (F, M, C) identity triple, appearances per spouse pair, triplets per family.
pub const TRIPLET_SAMPLES_PER_IDENTITY: usize = 5;
pub const TRIPLET_SAMPLES_PER_SPOUSE_PAIR: usize = 15;
pub const TRIPLET_SAMPLES_PER_FAMILY: usize = 30;

/// Kin relationship types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationshipType {
    BB,
    SS,
    SIBS,
    FD,
    FS,
    MD,
    MS,
    GFGD,
    GFGS,
    GMGD,
    GMGS,
}

impl RelationshipType {
    pub const ALL: [RelationshipType; 11] = [
        Self::BB,
        Self::SS,
        Self::SIBS,
        Self::FD,
        Self::FS,
        Self::MD,
        Self::MS,
        Self::GFGD,
        Self::GFGS,
        Self::GMGD,
        Self::GMGS,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Self::BB => "BB",
            Self::SS => "SS",
            Self::SIBS => "SIBS",
            Self::FD => "FD",
            Self::FS => "FS",
            Self::MD => "MD",
            Self::MS => "MS",
            Self::GFGD => "GFGD",
            Self::GFGS => "GFGS",
            Self::GMGD => "GMGD",
            Self::GMGS => "GMGS",
        }
    }
}

impl fmt::Display for RelationshipType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for RelationshipType {
    type Err = Error;

    /// Accepts codes case-insensitively, with or without hyphens (`F-D`).
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| *c != '-').collect::<String>().to_uppercase();
        Self::ALL
            .into_iter()
            .find(|t| t.code() == norm)
            .ok_or_else(|| Error::UnknownRelationshipType(s.to_string()))
    }
}

/// Parses a list of type codes.
pub fn parse_types<S: AsRef<str>>(codes: &[S]) -> Result<BTreeSet<RelationshipType>> {
    codes.iter().map(|c| c.as_ref().trim().parse()).collect()
}

/// What a pair compares: two faces of one subject, or two related members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Same,
    Kin(RelationshipType),
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::Same => f.write_str("SAME"),
            Relation::Kin(t) => t.fmt(f),
        }
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("same") {
            Ok(Relation::Same)
        } else {
            s.parse().map(Relation::Kin)
        }
    }
}

/// Pair label: related (genuine) or unrelated (imposter).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairLabel {
    Kin,
    NonKin,
}

impl PairLabel {
    pub fn is_kin(self) -> bool {
        self == PairLabel::Kin
    }
}

impl fmt::Display for PairLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairLabel::Kin => "KIN",
            PairLabel::NonKin => "NONKIN",
        })
    }
}

impl FromStr for PairLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_uppercase().as_str() {
            "KIN" | "1" | "GENUINE" => Ok(PairLabel::Kin),
            "NONKIN" | "NON-KIN" | "0" | "IMPOSTER" => Ok(PairLabel::NonKin),
            other => Err(Error::Parse {
                line: 0,
                reason: format!("unknown pair label `{other}`"),
            }),
        }
    }
}

/// A labeled pair of embedding ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    pub id_a: String,
    pub id_b: String,
    /// Relationship of a positive, or the relationship a negative was drawn to balance.
    pub rel: Option<Relation>,
    pub label: PairLabel,
    pub fold: usize,
}

/// Family record as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyRecord {
    pub fid: String,
    pub members: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub relationships: Vec<(String, String, String)>,
}

/// A family: members with their face ids and typed member-to-member relations.
///
/// A relation `(a, b, FD)` reads "a is the father, b the daughter".
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub fid: String,
    pub members: BTreeMap<String, Vec<String>>,
    pub relationships: BTreeMap<(String, String), RelationshipType>,
}

impl Family {
    pub fn new(
        fid: impl Into<String>,
        members: BTreeMap<String, Vec<String>>,
        relationships: BTreeMap<(String, String), RelationshipType>,
    ) -> Result<Self> {
        let fid = fid.into();
        for (a, b) in relationships.keys() {
            let reason = if a == b {
                Some(format!("member {a} related to itself"))
            } else if !members.contains_key(a) || !members.contains_key(b) {
                Some(format!("relationship ({a}, {b}) names an unknown member"))
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(Error::InvalidFamily { fid, reason });
            }
        }
        Ok(Self {
            fid,
            members,
            relationships,
        })
    }

    pub fn face_ids(&self) -> impl Iterator<Item = &String> {
        self.members.values().flatten()
    }
}

impl TryFrom<FamilyRecord> for Family {
    type Error = Error;

    fn try_from(rec: FamilyRecord) -> Result<Self> {
        let mut relationships = BTreeMap::new();
        for (a, b, t) in rec.relationships {
            let t: RelationshipType = t.parse()?;
            if relationships.insert((a.clone(), b.clone()), t).is_some_and(|old| old != t) {
                return Err(Error::InvalidFamily {
                    fid: rec.fid,
                    reason: format!("conflicting types for ({a}, {b})"),
                });
            }
        }
        Family::new(rec.fid, rec.members, relationships)
    }
}

impl From<&Family> for FamilyRecord {
    fn from(f: &Family) -> Self {
        FamilyRecord {
            fid: f.fid.clone(),
            members: f.members.clone(),
            relationships: f
                .relationships
                .iter()
                .map(|((a, b), t)| (a.clone(), b.clone(), t.to_string()))
                .collect(),
        }
    }
}

/// Maps every face id in `families` to its family id.
pub fn fid_index(families: &[Family]) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for fam in families {
        for id in fam.face_ids() {
            if out.insert(id.clone(), fam.fid.clone()).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
    }
    Ok(out)
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// All positive pairs: `C(N, 2)` same-subject pairs per member when
/// `same_subject` is set, and `N_a * N_b` cross-member pairs for each related
/// member pair whose type is in `types`.
///
/// Output is sorted by `(id_a, id_b)`; every pair is in fold 0 until
/// [`assign_pair_folds`] runs.
pub fn generate_positive_pairs(
    families: &[Family],
    types: &BTreeSet<RelationshipType>,
    same_subject: bool,
) -> Vec<Pair> {
    let mut pairs = Vec::new();
    for fam in families {
        if same_subject {
            for faces in fam.members.values() {
                for (i, a) in faces.iter().enumerate() {
                    for b in &faces[i + 1..] {
                        let (id_a, id_b) = ordered(a, b);
                        pairs.push(Pair {
                            id_a,
                            id_b,
                            rel: Some(Relation::Same),
                            label: PairLabel::Kin,
                            fold: 0,
                        });
                    }
                }
            }
        }
        for ((ma, mb), &t) in &fam.relationships {
            if !types.contains(&t) {
                continue;
            }
            for a in &fam.members[ma] {
                for b in &fam.members[mb] {
                    pairs.push(Pair {
                        id_a: a.clone(),
                        id_b: b.clone(),
                        rel: Some(Relation::Kin(t)),
                        label: PairLabel::Kin,
                        fold: 0,
                    });
                }
            }
        }
    }
    pairs.sort_by(|x, y| (&x.id_a, &x.id_b, x.rel).cmp(&(&y.id_a, &y.id_b, y.rel)));
    pairs
}

/// Deals subjects to `k` folds: descending pair count, ties by ascending
/// subject id, round-robin from fold 0.
pub fn assign_folds(
    subject_pair_counts: &BTreeMap<String, usize>,
    k: usize,
) -> Result<BTreeMap<String, usize>> {
    if k < 2 {
        return Err(Error::InvalidFoldCount(k));
    }
    let mut subjects: Vec<(&String, usize)> =
        subject_pair_counts.iter().map(|(s, &c)| (s, c)).collect();
    subjects.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(subjects
        .into_iter()
        .enumerate()
        .map(|(i, (s, _))| (s.clone(), i % k))
        .collect())
}

/// Assigns positive pairs to folds by family so that no family spans folds.
pub fn assign_pair_folds(pairs: &mut [Pair], families: &[Family], k: usize) -> Result<()> {
    let fids = fid_index(families)?;
    let fid_of = |id: &str| fids.get(id).cloned().ok_or_else(|| Error::UnknownId(id.to_string()));
    let mut counts: BTreeMap<String, usize> = families.iter().map(|f| (f.fid.clone(), 0)).collect();
    for p in pairs.iter() {
        *counts.entry(fid_of(&p.id_a)?).or_default() += 1;
    }
    let folds = assign_folds(&counts, k)?;
    for p in pairs.iter_mut() {
        p.fold = folds[&fid_of(&p.id_a)?];
    }
    Ok(())
}

/// Negative-sampling switches.
#[derive(Debug, Clone, Default)]
pub struct NegativeOptions {
    /// Subgroup tag per face id. When present, the base negatives pair faces of
    /// the same subgroup.
    pub subgroups: Option<HashMap<String, String>>,
    /// Adds a second, equally sized set of negatives whose faces come from
    /// different subgroups (requires `subgroups`).
    pub cross_subgroup: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum SubgroupRule {
    Any,
    Same,
    Different,
}

/// Draws one negative per positive within each (fold, relation) group by
/// re-pairing the group's first-role faces with its second-role faces across
/// families. Draws are without replacement; negatives never share a family.
///
/// Returns only the negatives, sorted by `(fold, rel, id_a, id_b)`.
pub fn sample_negative_pairs(
    positives: &[Pair],
    universe: &[Family],
    seed: u64,
    opts: &NegativeOptions,
) -> Result<Vec<Pair>> {
    let fids = fid_index(universe)?;
    if opts.cross_subgroup && opts.subgroups.is_none() {
        return Err(Error::InvalidHyperparameters(
            "cross-subgroup negatives need subgroup tags".into(),
        ));
    }
    let mut groups: BTreeMap<(usize, Option<Relation>), Vec<&Pair>> = BTreeMap::new();
    for p in positives.iter().filter(|p| p.label.is_kin()) {
        groups.entry((p.fold, p.rel)).or_default().push(p);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used: HashSet<(String, String)> = HashSet::new();
    let mut out = Vec::new();
    for ((fold, rel), members) in &groups {
        let left: Vec<&String> = members.iter().map(|p| &p.id_a).collect::<BTreeSet<_>>().into_iter().collect();
        let right: Vec<&String> = members.iter().map(|p| &p.id_b).collect::<BTreeSet<_>>().into_iter().collect();
        for id in left.iter().chain(&right) {
            if !fids.contains_key(id.as_str()) {
                return Err(Error::UnknownId(id.to_string()));
            }
        }
        let rules: &[SubgroupRule] = match (&opts.subgroups, opts.cross_subgroup) {
            (None, _) => &[SubgroupRule::Any],
            (Some(_), false) => &[SubgroupRule::Same],
            (Some(_), true) => &[SubgroupRule::Same, SubgroupRule::Different],
        };
        for &rule in rules {
            let valid = |a: &str, b: &str| {
                if fids[a] == fids[b] {
                    return false;
                }
                let Some(sg) = &opts.subgroups else {
                    return true;
                };
                match rule {
                    SubgroupRule::Any => true,
                    SubgroupRule::Same => sg.get(a).is_some() && sg.get(a) == sg.get(b),
                    SubgroupRule::Different => {
                        sg.get(a).is_some() && sg.get(b).is_some() && sg.get(a) != sg.get(b)
                    }
                }
            };
            let drawn = draw_group(&left, &right, members.len(), &valid, &mut used, &mut rng)
                .map_err(|available| Error::InsufficientCandidates {
                    fold: *fold,
                    group: rel.map_or("NONE".to_string(), |r| r.to_string()),
                    needed: members.len(),
                    available,
                })?;
            out.extend(drawn.into_iter().map(|(id_a, id_b)| Pair {
                id_a,
                id_b,
                rel: *rel,
                label: PairLabel::NonKin,
                fold: *fold,
            }));
        }
    }
    out.sort();
    Ok(out)
}

/// Pool sizes up to which candidates are enumerated instead of rejection-sampled.
const ENUMERATION_LIMIT: usize = 2_000_000;

/// Samples `needed` distinct cross pairs; on failure returns how many were available.
fn draw_group(
    left: &[&String],
    right: &[&String],
    needed: usize,
    valid: &dyn Fn(&str, &str) -> bool,
    used: &mut HashSet<(String, String)>,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<Vec<(String, String)>, usize> {
    if left.len() * right.len() <= ENUMERATION_LIMIT {
        let mut seen = HashSet::new();
        let mut candidates = Vec::new();
        for a in left {
            for b in right {
                let key = ordered(a, b);
                if valid(a, b) && !used.contains(&key) && seen.insert(key) {
                    candidates.push((a.to_string(), b.to_string()));
                }
            }
        }
        if candidates.len() < needed {
            return Err(candidates.len());
        }
        let picks = sample(rng, candidates.len(), needed);
        let chosen: Vec<_> = picks.into_iter().map(|i| candidates[i].clone()).collect();
        for (a, b) in &chosen {
            used.insert(ordered(a, b));
        }
        return Ok(chosen);
    }
    let mut chosen = Vec::with_capacity(needed);
    let mut attempts = 0usize;
    while chosen.len() < needed {
        attempts += 1;
        if attempts > needed.saturating_mul(200) {
            return Err(chosen.len());
        }
        let a = left[rng.random_range(0..left.len())];
        let b = right[rng.random_range(0..right.len())];
        if valid(a, b) && used.insert(ordered(a, b)) {
            chosen.push((a.to_string(), b.to_string()));
        }
    }
    Ok(chosen)
}

/// Positives, their family-disjoint folds, and balanced negatives in one list.
pub fn build_benchmark(
    families: &[Family],
    types: &BTreeSet<RelationshipType>,
    same_subject: bool,
    folds: usize,
    seed: u64,
    opts: &NegativeOptions,
) -> Result<Vec<Pair>> {
    let mut positives = generate_positive_pairs(families, types, same_subject);
    assign_pair_folds(&mut positives, families, folds)?;
    let negatives = sample_negative_pairs(&positives, families, seed, opts)?;
    let mut all = positives;
    all.extend(negatives);
    all.sort_by(|x, y| {
        (x.fold, x.rel, x.label, &x.id_a, &x.id_b).cmp(&(y.fold, y.rel, y.label, &y.id_a, &y.id_b))
    });
    Ok(all)
}

/// Nearest-rank percentile: the `ceil(p / 100 * N)`-th smallest value.
pub fn nearest_rank_percentile(values: &[f64], percentile: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyScores);
    }
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(Error::InvalidPercentile(percentile));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((percentile * n as f64) / 100.0).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

/// Indices of faces kept and dropped by percentile pruning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneOutcome {
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
}

/// Keeps face `i` iff the percentile of row `i` (its scores against all
/// faces of the subject) is at least `theta`.
pub fn prune_faces_by_median(scores: &ScoreMatrix, theta: f64, percentile: f64) -> Result<PruneOutcome> {
    if scores.rows() == 0 || scores.cols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut out = PruneOutcome {
        kept: Vec::new(),
        dropped: Vec::new(),
    };
    for (i, row) in scores.row_iter().enumerate() {
        if nearest_rank_percentile(row, percentile)? >= theta {
            out.kept.push(i);
        } else {
            out.dropped.push(i);
        }
    }
    Ok(out)
}

/// Average-pools the frames of a face track into one unit-norm embedding.
///
/// The result takes the first frame's id; subject and subgroup tags are kept
/// when every frame agrees on them.
pub fn fuse_track(frames: &[Embedding]) -> Result<Embedding> {
    let first = frames.first().ok_or(Error::EmptyTrack)?;
    let vec = mean_direction(frames)?;
    let shared = |get: fn(&Embedding) -> &Option<String>| {
        let v = get(first);
        frames.iter().all(|f| get(f) == v).then(|| v.clone()).flatten()
    };
    Ok(Embedding {
        id: first.id.clone(),
        fid: shared(|e| &e.fid),
        mid: shared(|e| &e.mid),
        subgroup: shared(|e| &e.subgroup),
        modality: Modality::Track,
        vec,
    })
}

/// Accepts a track iff the percentile of its per-face mean scores exceeds `theta`.
pub fn track_match_decision(sampled_scores: &[f64], theta: f64, percentile: f64) -> Result<bool> {
    Ok(nearest_rank_percentile(sampled_scores, percentile)? > theta)
}

/// A subject identified by family and member id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubjectId {
    pub fid: String,
    pub mid: String,
}

impl SubjectId {
    pub fn new(fid: impl Into<String>, mid: impl Into<String>) -> Self {
        Self {
            fid: fid.into(),
            mid: mid.into(),
        }
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.fid, self.mid)
    }
}

/// All media of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub subject: SubjectId,
    pub media: Vec<Embedding>,
}

impl Template {
    pub fn new(subject: SubjectId, media: Vec<Embedding>) -> Result<Self> {
        let first = media.first().ok_or(Error::EmptyTemplate)?;
        if let Some(bad) = media.iter().find(|m| m.dim() != first.dim()) {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                found: bad.dim(),
            });
        }
        Ok(Self { subject, media })
    }

    pub fn dim(&self) -> usize {
        self.media[0].dim()
    }

    pub fn len(&self) -> usize {
        self.media.len()
    }

    pub fn is_empty(&self) -> bool {
        self.media.is_empty()
    }
}

/// Groups embeddings carrying both `fid` and `mid` into templates, ordered by subject.
pub fn templates_from(embeddings: &[Embedding]) -> Result<Vec<Template>> {
    let mut by_subject: BTreeMap<SubjectId, Vec<Embedding>> = BTreeMap::new();
    for e in embeddings {
        if let (Some(fid), Some(mid)) = (&e.fid, &e.mid) {
            by_subject.entry(SubjectId::new(fid, mid)).or_default().push(e.clone());
        }
    }
    by_subject.into_iter().map(|(s, m)| Template::new(s, m)).collect()
}
