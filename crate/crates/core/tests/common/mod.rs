//! Synthetic data shared by the integration tests.
#![allow(dead_code)]

use kinface::dataset::{SubjectId, Template};
use kinface::debias::LabeledFeature;
use kinface::Embedding;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, d: usize, sigma: f64) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut *rng);
            sigma * z
        })
        .collect()
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    unit(&gaussian(rng, d, 1.0))
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `n` unit vectors around `k` random unit centers, labels `i % k`.
pub fn mixture(seed: u64, k: usize, d: usize, n: usize, sigma: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut r = rng(seed);
    let centers: Vec<Vec<f64>> = (0..k).map(|_| random_unit(&mut r, d)).collect();
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let points = labels
        .iter()
        .map(|&l| unit(&add(&centers[l], &gaussian(&mut r, d, sigma))))
        .collect();
    (points, labels)
}

/// A seeded permutation of `0..n`; prefixes give nested labeled subsets.
pub fn permutation(seed: u64, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng(seed));
    idx
}

/// Families of related subjects: every member's media sit near a shared
/// family direction plus a member offset.
pub struct PlantedFamilies {
    pub templates: Vec<Template>,
}

pub fn planted_families(seed: u64, families: usize, members: usize, media: usize, d: usize) -> PlantedFamilies {
    let mut r = rng(seed);
    let mut templates = Vec::new();
    for f in 0..families {
        let center = random_unit(&mut r, d);
        for m in 0..members {
            let offset = gaussian(&mut r, d, 0.15);
            let base = add(&center, &offset);
            let fid = format!("F{f:02}");
            let mid = format!("m{m}");
            let items = (0..media)
                .map(|i| {
                    let v = unit(&add(&base, &gaussian(&mut r, d, 0.05)));
                    Embedding::new(format!("{fid}_{mid}_{i}"), v).with_subject(&fid, &mid)
                })
                .collect();
            templates.push(Template::new(SubjectId::new(&fid, &mid), items).unwrap());
        }
    }
    PlantedFamilies { templates }
}

/// Identity clusters in the first `id_dims` coordinates, isotropic noise
/// everywhere and an independent binary subgroup shifting coordinate `d - 2`.
pub fn planted_debias(seed: u64, identities: usize, per_identity: usize, d: usize, id_dims: usize) -> Vec<LabeledFeature> {
    let mut r = rng(seed);
    let centers: Vec<Vec<f64>> = (0..identities)
        .map(|_| {
            let mut c = gaussian(&mut r, id_dims, 0.5);
            c.resize(d, 0.0);
            c
        })
        .collect();
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut data = Vec::new();
    for (id, c) in centers.iter().enumerate() {
        for _ in 0..per_identity {
            let att: usize = r.random_range(0..2);
            let mut x: Vec<f64> = c.iter().map(|v| v + noise.sample(&mut r)).collect();
            x[d - 2] += if att == 1 { 0.5 } else { -0.5 };
            data.push(LabeledFeature { x, y_id: id, y_att: att });
        }
    }
    data
}
