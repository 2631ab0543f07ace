//! File formats shared with the command-line front end.
//!
//! * Embeddings: a JSON array of [`Embedding`] objects, or one object per line.
//! * Side information: CSV `id,class_label`.
//! * Pairs: CSV `id_a,id_b,label,rel,fold`.
//! * Families: a JSON array of [`FamilyRecord`].
//!
//! Writers render into strings so output bytes depend only on the values.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::dataset::{Family, FamilyRecord, Pair};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::eval::{Cmc, RankedList, RateCurve};

pub fn read_embeddings(path: &Path) -> Result<Vec<Embedding>> {
    parse_embeddings(&fs::read_to_string(path)?)
}

pub fn parse_embeddings(text: &str) -> Result<Vec<Embedding>> {
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(text)?);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn embeddings_to_json(embeddings: &[Embedding]) -> Result<String> {
    Ok(serde_json::to_string_pretty(embeddings)? + "\n")
}

/// `(id, class_label)` rows.
pub fn read_side_info(path: &Path) -> Result<Vec<(String, String)>> {
    parse_side_info(&fs::read_to_string(path)?)
}

pub fn parse_side_info(text: &str) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Parse {
                line: i + 2,
                reason: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        rows.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok(rows)
}

pub fn read_pairs(path: &Path) -> Result<Vec<Pair>> {
    parse_pairs(&fs::read_to_string(path)?)
}

pub fn parse_pairs(text: &str) -> Result<Vec<Pair>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut pairs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |reason: String| Error::Parse { line, reason };
        if rec.len() < 3 {
            return Err(bad(format!("expected at least 3 fields, found {}", rec.len())));
        }
        let label = rec[2].parse().map_err(|e: Error| bad(e.to_string()))?;
        let rel = match rec.get(3) {
            Some(r) if !r.is_empty() => Some(r.parse().map_err(|e: Error| bad(e.to_string()))?),
            _ => None,
        };
        let fold = match rec.get(4) {
            Some(f) if !f.is_empty() => f.parse().map_err(|_| bad(format!("bad fold `{f}`")))?,
            _ => 0,
        };
        pairs.push(Pair {
            id_a: rec[0].to_string(),
            id_b: rec[1].to_string(),
            rel,
            label,
            fold,
        });
    }
    Ok(pairs)
}

pub fn pairs_to_csv(pairs: &[Pair]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id_a", "id_b", "label", "rel", "fold"])?;
    for p in pairs {
        w.write_record([
            p.id_a.clone(),
            p.id_b.clone(),
            p.label.to_string(),
            p.rel.map(|r| r.to_string()).unwrap_or_default(),
            p.fold.to_string(),
        ])?;
    }
    finish(w)
}

pub fn read_families(path: &Path) -> Result<Vec<Family>> {
    parse_families(&fs::read_to_string(path)?)
}

pub fn parse_families(text: &str) -> Result<Vec<Family>> {
    let records: Vec<FamilyRecord> = serde_json::from_str(text)?;
    records.into_iter().map(Family::try_from).collect()
}

/// One partition row: member id, cluster and cosine to its own centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionRow {
    pub id: String,
    pub cluster: usize,
    pub confidence: f64,
}

/// Rows grouped by cluster, most confident first; ties go by id.
pub fn partition_to_csv(rows: &[PartitionRow]) -> Result<String> {
    let mut sorted: Vec<&PartitionRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.cluster
            .cmp(&b.cluster)
            .then(b.confidence.total_cmp(&a.confidence))
            .then_with(|| a.id.cmp(&b.id))
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "cluster", "confidence"])?;
    for r in sorted {
        w.write_record([r.id.clone(), r.cluster.to_string(), r.confidence.to_string()])?;
    }
    finish(w)
}

pub fn det_to_csv(curve: &RateCurve) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["threshold", "far", "fnr", "tar", "accuracy"])?;
    for p in &curve.points {
        w.write_record([p.threshold, p.far, p.fnr, p.tar, p.accuracy].map(|v| v.to_string()))?;
    }
    finish(w)
}

pub fn cmc_to_csv(cmc: &Cmc) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "rate"])?;
    for (i, rate) in cmc.curve.iter().enumerate() {
        w.write_record([(i + 1).to_string(), rate.to_string()])?;
    }
    finish(w)
}

/// `probe_id,rank,gallery_subject,score` for every list.
pub fn ranked_to_csv(lists: &[RankedList]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["probe_id", "rank", "gallery_subject", "score"])?;
    for l in lists {
        for (i, (g, s)) in l.order.iter().zip(&l.scores).enumerate() {
            w.write_record([l.probe.clone(), (i + 1).to_string(), g.clone(), s.to_string()])?;
        }
    }
    finish(w)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
