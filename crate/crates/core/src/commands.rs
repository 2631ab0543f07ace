//! Subcommand pipelines behind the `kinface` binary. Each one reads its
//! inputs, runs one algorithm and writes fixed-name files under `out`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::clustering::{nmi, ssc_kmeans_fit, Partition, SideInfo, SscOptions};
use crate::dataset::{build_benchmark, parse_types, NegativeOptions, Relation, RelationshipType, SubjectId, Template};
use crate::debias::{probe_classifier, train_debias, DebiasConfig, EpochLoss, LabeledFeature, ProbeOptions};
use crate::embedding::{cosine_similarity, Dataset, Embedding};
use crate::error::{Error, Result};
use crate::eval::{
    cmc, det_curve, mean_average_precision, optimal_threshold, rates_at_threshold, subgroup_threshold_report,
    tar_at_far, verification_accuracy_by_type, OptimalThreshold, Rates, ScoredPair, ScoredPairSet, SubgroupReport,
    TarAtFar, TypeAccuracyReport,
};
use crate::fusion::{gallery_adapt, rank_gallery, rank_templates, Fusion};
use crate::io;
use crate::svm::SvmOptions;

/// Target FAR used by the per-subgroup report when none is given.
pub const DEFAULT_SUBGROUP_FAR: f64 = 1e-3;
/// Ranks summarized in the retrieval report.
pub const REPORT_RANKS: [usize; 4] = [1, 5, 10, 20];

fn write(out: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(name), contents)?;
    Ok(())
}

/// Indexes distinct labels in sorted order.
fn index_labels<'a>(labels: impl Iterator<Item = &'a str>) -> BTreeMap<&'a str, usize> {
    let set: BTreeSet<&str> = labels.collect();
    set.into_iter().enumerate().map(|(i, l)| (l, i)).collect()
}

#[derive(Debug, Clone)]
pub struct ClusterArgs {
    pub embeddings: PathBuf,
    pub side: Option<PathBuf>,
    pub k: usize,
    pub lambda: f64,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterReport {
    pub n: usize,
    pub k: usize,
    pub k_prime: usize,
    pub labeled: usize,
    pub lambda: f64,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    /// Agreement with the side information on the labeled rows.
    pub nmi_side: Option<f64>,
    /// Agreement with family ids, when every embedding carries one.
    pub nmi_family: Option<f64>,
    /// Same, restricted to rows without side information.
    pub nmi_family_unlabeled: Option<f64>,
}

/// Writes `partition.csv` and `report.json`.
pub fn cluster(args: &ClusterArgs) -> Result<ClusterReport> {
    let data = Dataset::new(io::read_embeddings(&args.embeddings)?)?;
    let side_rows = match &args.side {
        Some(p) => io::read_side_info(p)?,
        None => Vec::new(),
    };
    let class_index = index_labels(side_rows.iter().map(|(_, c)| c.as_str()));
    let mut rows = Vec::with_capacity(side_rows.len());
    let mut classes = Vec::with_capacity(side_rows.len());
    for (id, class) in &side_rows {
        rows.push(data.position(id).ok_or_else(|| Error::UnknownId(id.clone()))?);
        classes.push(class_index[class.as_str()]);
    }
    let side = if rows.is_empty() {
        SideInfo::empty()
    } else {
        SideInfo::from_labels(rows, classes)?
    };
    let fit = ssc_kmeans_fit(&data, &side, args.k, args.lambda, args.seed, SscOptions::default())?;

    let nmi_side = if side.is_empty() {
        None
    } else {
        Some(nmi(&fit.partition.restrict(side.member_rows())?, &side.as_partition()?)?)
    };
    let fids: Option<Vec<&str>> = data.embeddings().iter().map(|e| e.fid.as_deref()).collect();
    let (nmi_family, nmi_family_unlabeled) = match fids {
        Some(fids) => {
            let idx = index_labels(fids.iter().copied());
            let truth = Partition::from_labels(fids.iter().map(|f| idx[f]).collect())?;
            let labeled: BTreeSet<usize> = side.member_rows().iter().copied().collect();
            let unlabeled: Vec<usize> = (0..data.len()).filter(|i| !labeled.contains(i)).collect();
            let rest = if unlabeled.is_empty() {
                None
            } else {
                Some(nmi(&fit.partition.restrict(&unlabeled)?, &truth.restrict(&unlabeled)?)?)
            };
            (Some(nmi(&fit.partition, &truth)?), rest)
        }
        None => (None, None),
    };

    let partition_rows: Vec<io::PartitionRow> = data
        .embeddings()
        .iter()
        .zip(fit.partition.labels())
        .zip(&fit.confidence)
        .map(|((e, &cluster), &confidence)| io::PartitionRow {
            id: e.id.clone(),
            cluster,
            confidence,
        })
        .collect();
    let report = ClusterReport {
        n: data.len(),
        k: args.k,
        k_prime: side.k_prime(),
        labeled: side.len(),
        lambda: args.lambda,
        seed: args.seed,
        iterations: fit.iterations,
        converged: fit.converged,
        objective: fit.objective_trace.last().copied().unwrap_or(0.0),
        nmi_side,
        nmi_family,
        nmi_family_unlabeled,
    };
    write(&args.out, "partition.csv", &io::partition_to_csv(&partition_rows)?)?;
    write(&args.out, "report.json", &io::to_json(&report)?)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyMode {
    Global,
    PerType,
    PerSubgroup,
}

#[derive(Debug, Clone)]
pub struct VerifyArgs {
    pub embeddings: PathBuf,
    pub pairs: PathBuf,
    pub mode: VerifyMode,
    pub targets: Vec<f64>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub mode: VerifyMode,
    pub pairs: usize,
    pub genuine: usize,
    pub imposter: usize,
    pub optimal: OptimalThreshold,
    pub rates_at_optimal: Rates,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tar_at_far: Option<Vec<TarAtFar>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_type: Option<TypeAccuracyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_subgroup: Option<SubgroupReport>,
}

/// Subgroup of a pair: the shared tag, or both tags joined by `|` in sorted order.
fn pair_subgroup(a: &Embedding, b: &Embedding) -> Option<String> {
    let (sa, sb) = (a.subgroup.as_deref()?, b.subgroup.as_deref()?);
    Some(if sa == sb {
        sa.to_string()
    } else if sa < sb {
        format!("{sa}|{sb}")
    } else {
        format!("{sb}|{sa}")
    })
}

/// Scores every listed pair by cosine similarity.
pub fn score_pairs(data: &Dataset, pairs: &[crate::dataset::Pair]) -> Result<ScoredPairSet> {
    let scored = pairs
        .iter()
        .map(|p| {
            let a = data.require(&p.id_a)?;
            let b = data.require(&p.id_b)?;
            Ok(ScoredPair {
                score: cosine_similarity(&a.vec, &b.vec)?,
                label: p.label,
                rel: p.rel,
                subgroup: pair_subgroup(a, b),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ScoredPairSet::new(scored)
}

/// Writes `report.json` and `det.csv`. Per-type thresholds are each type's
/// accuracy-optimal threshold on the given pairs.
pub fn verify(args: &VerifyArgs) -> Result<VerifyReport> {
    let data = Dataset::new(io::read_embeddings(&args.embeddings)?)?;
    let scored = score_pairs(&data, &io::read_pairs(&args.pairs)?)?;
    let optimal = optimal_threshold(&scored)?;
    let tar = if args.targets.is_empty() {
        None
    } else {
        Some(tar_at_far(&scored, &args.targets)?)
    };
    let per_type = match args.mode {
        VerifyMode::PerType => {
            let mut by_rel: BTreeMap<Relation, Vec<ScoredPair>> = BTreeMap::new();
            for (i, p) in scored.pairs().iter().enumerate() {
                by_rel.entry(p.rel.ok_or(Error::MissingType(i))?).or_default().push(p.clone());
            }
            let thetas = by_rel
                .into_iter()
                .map(|(rel, pairs)| {
                    let theta = optimal_threshold(&ScoredPairSet::new(pairs)?)
                        .map_err(|_| Error::DegenerateLabels(format!(" for type {rel}")))?
                        .theta;
                    Ok((rel, theta))
                })
                .collect::<Result<BTreeMap<_, _>>>()?;
            Some(verification_accuracy_by_type(&scored, &thetas)?)
        }
        _ => None,
    };
    let per_subgroup = match args.mode {
        VerifyMode::PerSubgroup => {
            let target = args.targets.first().copied().unwrap_or(DEFAULT_SUBGROUP_FAR);
            Some(subgroup_threshold_report(&scored, target)?)
        }
        _ => None,
    };
    let report = VerifyReport {
        mode: args.mode,
        pairs: scored.len(),
        genuine: scored.genuine_scores().len(),
        imposter: scored.imposter_scores().len(),
        rates_at_optimal: rates_at_threshold(&scored, optimal.theta)?,
        optimal,
        tar_at_far: tar,
        per_type,
        per_subgroup,
    };
    write(&args.out, "det.csv", &io::det_to_csv(&det_curve(&scored)?)?)?;
    write(&args.out, "report.json", &io::to_json(&report)?)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrievalFusion {
    Score,
    Feature,
    Ta,
}

#[derive(Debug, Clone)]
pub struct RetrieveArgs {
    pub embeddings: PathBuf,
    /// Text file of probe subjects, one `fid/mid` per line.
    pub probes: PathBuf,
    /// Text file of gallery subjects, one `fid/mid` per line.
    pub gallery: PathBuf,
    pub fusion: RetrievalFusion,
    pub lambda: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct RetrieveReport {
    pub fusion: RetrievalFusion,
    pub probes: usize,
    pub gallery: usize,
    pub map: f64,
    pub cmc: Vec<(usize, f64)>,
}

/// Subject ids listed one per line; blank lines and `#` comments are skipped.
pub fn read_subject_list(path: &Path) -> Result<Vec<SubjectId>> {
    fs::read_to_string(path)?
        .lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            let (fid, mid) = l.split_once('/').ok_or_else(|| Error::Parse {
                line: i + 1,
                reason: format!("expected `fid/mid`, found `{l}`"),
            })?;
            Ok(SubjectId::new(fid, mid))
        })
        .collect()
}

/// Writes `report.json`, `cmc.csv` and `ranked.csv`. Gallery subjects from a
/// probe's family are its relevant entries. With `ta`, media of subjects in
/// neither list serve as extra negatives.
pub fn retrieve(args: &RetrieveArgs) -> Result<RetrieveReport> {
    let data = Dataset::new(io::read_embeddings(&args.embeddings)?)?;
    let probe_ids = read_subject_list(&args.probes)?;
    let gallery_ids = read_subject_list(&args.gallery)?;
    if gallery_ids.is_empty() {
        return Err(Error::InvalidArgument("gallery is empty".into()));
    }
    if probe_ids.is_empty() {
        return Err(Error::InvalidArgument("probe list is empty".into()));
    }
    let templates: HashMap<SubjectId, Template> = crate::dataset::templates_from(data.embeddings())?
        .into_iter()
        .map(|t| (t.subject.clone(), t))
        .collect();
    let lookup = |ids: &[SubjectId]| {
        ids.iter()
            .map(|s| templates.get(s).cloned().ok_or_else(|| Error::UnknownId(s.to_string())))
            .collect::<Result<Vec<_>>>()
    };
    let probes = lookup(&probe_ids)?;
    let gallery = lookup(&gallery_ids)?;

    let lists = match args.fusion {
        RetrievalFusion::Score | RetrievalFusion::Feature => {
            let fusion = if args.fusion == RetrievalFusion::Score {
                Fusion::Score
            } else {
                Fusion::Feature
            };
            probes
                .iter()
                .map(|p| rank_templates(p, &gallery, fusion))
                .collect::<Result<Vec<_>>>()?
        }
        RetrievalFusion::Ta => {
            let listed: BTreeSet<&SubjectId> = probe_ids.iter().chain(&gallery_ids).collect();
            let negatives: Vec<Embedding> = data
                .embeddings()
                .iter()
                .filter(|e| match (&e.fid, &e.mid) {
                    (Some(f), Some(m)) => !listed.contains(&SubjectId::new(f, m)),
                    _ => true,
                })
                .cloned()
                .collect();
            let adapted = gallery_adapt(&gallery, &negatives, args.lambda, SvmOptions::default())?;
            probes
                .iter()
                .map(|p| rank_gallery(p, &adapted))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let curve = cmc(&lists, &REPORT_RANKS)?;
    let report = RetrieveReport {
        fusion: args.fusion,
        probes: probes.len(),
        gallery: gallery.len(),
        map: mean_average_precision(&lists)?,
        cmc: curve.at.clone(),
    };
    write(&args.out, "ranked.csv", &io::ranked_to_csv(&lists)?)?;
    write(&args.out, "cmc.csv", &io::cmc_to_csv(&curve)?)?;
    write(&args.out, "report.json", &io::to_json(&report)?)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct BuildPairsArgs {
    pub families: PathBuf,
    pub seed: u64,
    pub folds: usize,
    /// Relationship codes to include; all types when `None`.
    pub types: Option<Vec<String>>,
    /// Also emit same-subject positives.
    pub same_subject: bool,
    pub out: PathBuf,
}

/// Writes `pairs.csv`.
pub fn build_pairs(args: &BuildPairsArgs) -> Result<usize> {
    let families = io::read_families(&args.families)?;
    let types = match &args.types {
        Some(codes) => parse_types(codes)?,
        None => RelationshipType::ALL.into_iter().collect(),
    };
    let pairs = build_benchmark(
        &families,
        &types,
        args.same_subject,
        args.folds,
        args.seed,
        &NegativeOptions::default(),
    )?;
    write(&args.out, "pairs.csv", &io::pairs_to_csv(&pairs)?)?;
    Ok(pairs.len())
}

#[derive(Debug, Clone)]
pub struct DebiasArgs {
    /// Embeddings carrying subject (`fid`, `mid`) and `subgroup` tags.
    pub features: PathBuf,
    pub lambda: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub probe: ProbeOptions,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct DebiasReport {
    pub lambda: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub identities: usize,
    pub subgroups: usize,
    pub chance: f64,
    pub trace: Vec<EpochLoss>,
    pub leakage_before: f64,
    pub leakage_after: f64,
    pub identity_before: f64,
    pub identity_after: f64,
}

/// Training samples from tagged embeddings: identity and subgroup indices
/// follow the sorted order of subject ids and subgroup tags.
pub fn labeled_features(embeddings: &[Embedding]) -> Result<Vec<LabeledFeature>> {
    let mut subjects = Vec::with_capacity(embeddings.len());
    let mut groups = Vec::with_capacity(embeddings.len());
    for (i, e) in embeddings.iter().enumerate() {
        let (Some(fid), Some(mid)) = (&e.fid, &e.mid) else {
            return Err(Error::Parse {
                line: i + 1,
                reason: format!("embedding `{}` has no subject tag", e.id),
            });
        };
        subjects.push(format!("{fid}/{mid}"));
        groups.push(e.subgroup.as_deref().ok_or(Error::MissingSubgroup(i))?);
    }
    let id_index = index_labels(subjects.iter().map(String::as_str));
    let att_index = index_labels(groups.iter().copied());
    Ok(embeddings
        .iter()
        .zip(subjects.iter().zip(&groups))
        .map(|(e, (s, g))| LabeledFeature {
            x: e.vec.clone(),
            y_id: id_index[s.as_str()],
            y_att: att_index[g],
        })
        .collect())
}

/// Writes `checkpoint.json` and `report.json`. Leakage and identity accuracy
/// are probed on the raw features and on the adapted ones.
pub fn debias(args: &DebiasArgs) -> Result<DebiasReport> {
    let embeddings = io::read_embeddings(&args.features)?;
    if embeddings.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let data = labeled_features(&embeddings)?;
    let fit = train_debias(
        &data,
        DebiasConfig {
            lambda: args.lambda,
            epochs: args.epochs,
            lr: args.lr,
            batch_size: args.batch_size,
            seed: args.seed,
        },
    )?;
    let raw: Vec<Vec<f64>> = data.iter().map(|s| s.x.clone()).collect();
    let adapted = raw.iter().map(|x| fit.model.transform(x)).collect::<Result<Vec<_>>>()?;
    let att: Vec<usize> = data.iter().map(|s| s.y_att).collect();
    let ids: Vec<usize> = data.iter().map(|s| s.y_id).collect();
    let probe = |x: &[Vec<f64>], y: &[usize]| probe_classifier(x, y, &args.probe).map(|r| r.accuracy);
    let report = DebiasReport {
        lambda: args.lambda,
        epochs: args.epochs,
        lr: args.lr,
        seed: args.seed,
        identities: fit.model.n_id(),
        subgroups: fit.model.n_att(),
        chance: 1.0 / fit.model.n_att() as f64,
        trace: fit.trace.clone(),
        leakage_before: probe(&raw, &att)?,
        leakage_after: probe(&adapted, &att)?,
        identity_before: probe(&raw, &ids)?,
        identity_after: probe(&adapted, &ids)?,
    };
    write(&args.out, "checkpoint.json", &io::to_json(&fit.model)?)?;
    write(&args.out, "report.json", &io::to_json(&report)?)?;
    Ok(report)
}
