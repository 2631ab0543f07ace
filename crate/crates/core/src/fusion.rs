//! Template-level scoring: score fusion, feature fusion and template
//! adaptation (per-template linear classifiers trained against negatives).

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;

use crate::dataset::{SubjectId, Template};
use crate::embedding::{cosine_similarity, mean_direction, Embedding};
use crate::error::{Error, Result};
use crate::eval::RankedList;
use crate::matcher::score_matrix;
use crate::svm::{train_cwsvm, LinearModel, SvmOptions};

/// Mean of all `|a| * |b|` cosine scores between two templates.
pub fn score_fusion(a: &Template, b: &Template) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyTemplate);
    }
    let va: Vec<&[f64]> = a.media.iter().map(|m| m.vec.as_slice()).collect();
    let vb: Vec<&[f64]> = b.media.iter().map(|m| m.vec.as_slice()).collect();
    let m = score_matrix(&va, &vb)?;
    let total: f64 = m.row_iter().flatten().sum();
    Ok(total / (m.rows() * m.cols()) as f64)
}

/// Unit-normalized mean of a template's media, tagged with its subject.
pub fn feature_fusion(t: &Template) -> Result<Embedding> {
    let first = t.media.first().ok_or(Error::EmptyTemplate)?;
    let vec = mean_direction(&t.media.iter().map(|m| m.vec.as_slice()).collect::<Vec<_>>())?;
    let mut fused = Embedding::new(t.subject.to_string(), vec)
        .with_subject(&t.subject.fid, &t.subject.mid)
        .with_modality(first.modality);
    if let Some(sg) = &first.subgroup {
        if t.media.iter().all(|m| m.subgroup.as_ref() == Some(sg)) {
            fused = fused.with_subgroup(sg);
        }
    }
    Ok(fused)
}

/// Mean decision of `model` over a template's media.
pub fn template_decision(model: &LinearModel, t: &Template) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::EmptyTemplate);
    }
    let sum = t
        .media
        .iter()
        .map(|m| model.decision(&m.vec))
        .sum::<Result<f64>>()?;
    Ok(sum / t.len() as f64)
}

/// `s(P, Q) = 1/2 P(q) + 1/2 Q(p)`.
pub fn half_sum(p_of_q: f64, q_of_p: f64) -> f64 {
    0.5 * p_of_q + 0.5 * q_of_p
}

fn adapt(t: &Template, negatives: &[&[f64]], lambda: f64, opts: SvmOptions) -> Result<LinearModel> {
    let pos: Vec<&[f64]> = t.media.iter().map(|m| m.vec.as_slice()).collect();
    train_cwsvm(&pos, negatives, lambda, opts)
}

/// Probe adaptation: one model per template, each against the shared
/// negatives, evaluated on the opposite template.
pub fn probe_adaptation_score(
    p: &Template,
    q: &Template,
    negatives: &[Embedding],
    lambda: f64,
    opts: SvmOptions,
) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::EmptyTemplate);
    }
    if negatives.is_empty() {
        return Err(Error::EmptyNegatives);
    }
    let media: HashSet<&str> = p.media.iter().chain(&q.media).map(|m| m.id.as_str()).collect();
    if let Some(n) = negatives.iter().find(|n| media.contains(n.id.as_str())) {
        return Err(Error::NegativesOverlap(n.id.clone()));
    }
    let neg: Vec<&[f64]> = negatives.iter().map(|n| n.vec.as_slice()).collect();
    let (pm, qm) = rayon::join(|| adapt(p, &neg, lambda, opts), || adapt(q, &neg, lambda, opts));
    Ok(half_sum(template_decision(&pm?, q)?, template_decision(&qm?, p)?))
}

/// One adapted model per gallery template.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedGallery {
    pub models: Vec<(SubjectId, LinearModel)>,
}

/// Gallery adaptation: each template's negatives are `train_negatives`
/// followed by the media of every other gallery template.
pub fn gallery_adapt(
    gallery: &[Template],
    train_negatives: &[Embedding],
    lambda: f64,
    opts: SvmOptions,
) -> Result<AdaptedGallery> {
    if gallery.len() < 2 {
        return Err(Error::SingletonGallery);
    }
    if gallery.iter().any(Template::is_empty) {
        return Err(Error::EmptyTemplate);
    }
    let models = gallery
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let neg = gallery_negatives(gallery, i, train_negatives);
            Ok((t.subject.clone(), adapt(t, &neg, lambda, opts)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AdaptedGallery { models })
}

/// Negative pool used for gallery template `i`.
pub fn gallery_negatives<'a>(gallery: &'a [Template], i: usize, train_negatives: &'a [Embedding]) -> Vec<&'a [f64]> {
    train_negatives
        .iter()
        .chain(
            gallery
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, t)| &t.media),
        )
        .map(|m| m.vec.as_slice())
        .collect()
}

/// Gallery subjects from the probe's family count as relevant.
fn relevant_for<'a>(probe: &Template, subjects: impl Iterator<Item = &'a SubjectId>) -> BTreeSet<String> {
    subjects
        .filter(|s| s.fid == probe.subject.fid)
        .map(ToString::to_string)
        .collect()
}

/// Ranks adapted gallery templates by mean model decision over the probe's media.
pub fn rank_gallery(probe: &Template, adapted: &AdaptedGallery) -> Result<RankedList> {
    let scored = adapted
        .models
        .iter()
        .map(|(s, m)| Ok((s.to_string(), template_decision(m, probe)?)))
        .collect::<Result<Vec<_>>>()?;
    let relevant = relevant_for(probe, adapted.models.iter().map(|(s, _)| s));
    RankedList::from_scores(probe.subject.to_string(), scored, relevant)
}

/// Template comparison used for non-adapted retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fusion {
    Score,
    Feature,
}

/// Ranks gallery templates against a probe by score or feature fusion.
pub fn rank_templates(probe: &Template, gallery: &[Template], fusion: Fusion) -> Result<RankedList> {
    let probe_vec = match fusion {
        Fusion::Feature => Some(feature_fusion(probe)?),
        Fusion::Score => None,
    };
    let scored = gallery
        .iter()
        .map(|g| {
            let s = match &probe_vec {
                Some(p) => cosine_similarity(&p.vec, &feature_fusion(g)?.vec)?,
                None => score_fusion(probe, g)?,
            };
            Ok((g.subject.to_string(), s))
        })
        .collect::<Result<Vec<_>>>()?;
    let relevant = relevant_for(probe, gallery.iter().map(|g| &g.subject));
    RankedList::from_scores(probe.subject.to_string(), scored, relevant)
}
