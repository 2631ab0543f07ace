//! Vector primitives and the shared embedding data model.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms at or below this value are treated as zero.
pub const ZERO_NORM_TOL: f64 = 1e-12;

/// Capture modality of an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Still,
    Track,
    Audio,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Still => "still",
            Modality::Track => "track",
            Modality::Audio => "audio",
        })
    }
}

/// A precomputed encoding of one face (or voice) sample plus its tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub id: String,
    #[serde(default)]
    pub fid: Option<String>,
    #[serde(default)]
    pub mid: Option<String>,
    #[serde(default)]
    pub subgroup: Option<String>,
    pub modality: Modality,
    pub vec: Vec<f64>,
}

impl Embedding {
    /// Untagged still-image embedding.
    pub fn new(id: impl Into<String>, vec: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            fid: None,
            mid: None,
            subgroup: None,
            modality: Modality::Still,
            vec,
        }
    }

    pub fn with_subject(mut self, fid: impl Into<String>, mid: impl Into<String>) -> Self {
        self.fid = Some(fid.into());
        self.mid = Some(mid.into());
        self
    }

    pub fn with_subgroup(mut self, subgroup: impl Into<String>) -> Self {
        self.subgroup = Some(subgroup.into());
        self
    }

    pub fn with_modality(mut self, modality: Modality) -> Self {
        self.modality = modality;
        self
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }

    /// Replaces `vec` with its unit-norm direction.
    pub fn normalize(&mut self) -> Result<()> {
        self.vec = l2_normalize(&self.vec)?;
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.vec
    }
}

/// An indexed collection of embeddings sharing one dimension.
#[derive(Debug, Clone)]
pub struct Dataset {
    embeddings: Vec<Embedding>,
    dim: usize,
    index: HashMap<String, usize>,
}

impl Dataset {
    /// Validates ids, dimensions and finiteness.
    pub fn new(embeddings: Vec<Embedding>) -> Result<Self> {
        let dim = embeddings.first().map(Embedding::dim).ok_or(Error::EmptyDataset)?;
        if dim == 0 {
            return Err(Error::EmptyInput("embedding vector"));
        }
        let mut index = HashMap::with_capacity(embeddings.len());
        for (pos, e) in embeddings.iter().enumerate() {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.dim(),
                });
            }
            if e.vec.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("embedding vector"));
            }
            if index.insert(e.id.clone(), pos).is_some() {
                return Err(Error::DuplicateId(e.id.clone()));
            }
        }
        Ok(Self {
            embeddings,
            dim,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn embeddings(&self) -> &[Embedding] {
        &self.embeddings
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Embedding> {
        self.position(id).map(|p| &self.embeddings[p])
    }

    /// Looks up `id`, failing with [`Error::UnknownId`].
    pub fn require(&self, id: &str) -> Result<&Embedding> {
        self.get(id).ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    /// Returns a copy with every vector scaled to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let embeddings = self
            .embeddings
            .iter()
            .cloned()
            .map(Embedding::normalized)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            embeddings,
            dim: self.dim,
            index: self.index.clone(),
        })
    }

    pub fn into_embeddings(self) -> Vec<Embedding> {
        self.embeddings
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// Scales `v` to unit L2 norm.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = l2_norm(v);
    if !norm.is_finite() {
        return Err(Error::NonFinite("vector"));
    }
    if norm <= ZERO_NORM_TOL {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Cosine of the angle between `a` and `b`, clamped to `[-1, 1]`.
///
/// The expression is symmetric term by term, so swapping the arguments gives a
/// bitwise-identical result.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na <= ZERO_NORM_TOL || nb <= ZERO_NORM_TOL {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Arithmetic mean of `vectors`, re-scaled to unit norm.
///
/// Used for track pooling and naive template feature fusion.
pub fn mean_direction<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Vec<f64>> {
    let first = vectors.first().ok_or(Error::EmptyInput("vector list"))?.as_ref();
    let mut sum = vec![0.0; first.len()];
    for v in vectors {
        let v = v.as_ref();
        check_dims(first, v)?;
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let n = vectors.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    l2_normalize(&sum)
}
