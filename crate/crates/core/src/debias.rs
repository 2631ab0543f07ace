//! Adversarial feature adapter and subgroup leakage probe.
//!
//! The adapter maps `x` in `R^d` to `f = tanh(W x + b)` in `R^(d/2)`. An
//! identity head and an attribute (subgroup) head read `f` through affine
//! layers followed by softmax. Heads minimize their own cross-entropy; the
//! mapping minimizes `L_ID - lambda * L_ATT`, which is what a gradient
//! reversal layer in front of the attribute head produces.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{confusion_matrix, ConfusionMatrix};

/// One training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeature {
    pub x: Vec<f64>,
    pub y_id: usize,
    pub y_att: usize,
}

/// Dense layer `y = W x + b`, `W` stored row-major with `shape = [out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub shape: [usize; 2],
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Affine {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Self {
            shape: [out, inp],
            w: vec![0.0; out * inp],
            b: vec![0.0; out],
        }
    }

    fn uniform(out: usize, inp: usize, bound: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut a = Self::zeros(out, inp);
        for v in &mut a.w {
            *v = rng.random_range(-bound..bound);
        }
        a
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let inp = self.shape[1];
        self.w
            .chunks(inp)
            .zip(&self.b)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    /// `W^T v`
    fn apply_transposed(&self, v: &[f64]) -> Vec<f64> {
        let inp = self.shape[1];
        let mut out = vec![0.0; inp];
        for (row, vi) in self.w.chunks(inp).zip(v) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * vi;
            }
        }
        out
    }

    /// Adds the gradient of `delta . (W x + b)`.
    fn accumulate(&mut self, delta: &[f64], x: &[f64]) {
        let inp = self.shape[1];
        for ((row, b), d) in self.w.chunks_mut(inp).zip(&mut self.b).zip(delta) {
            *b += d;
            for (w, xi) in row.iter_mut().zip(x) {
                *w += d * xi;
            }
        }
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Affine) {
        for (a, b) in self.w.iter_mut().zip(&other.w).chain(self.b.iter_mut().zip(&other.b)) {
            *a += alpha * b;
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w.iter().chain(&self.b)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w.iter_mut().chain(self.b.iter_mut())
    }

    fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Mapping, identity head and attribute head, plus the reversal scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasModel {
    pub lambda: f64,
    pub mapping: Affine,
    pub id_head: Affine,
    pub att_head: Affine,
}

/// Outputs of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub f_deb: Vec<f64>,
    pub id_probs: Vec<f64>,
    pub att_probs: Vec<f64>,
}

/// Mean negative log-likelihoods over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Losses {
    pub id: f64,
    pub att: f64,
    /// `id + att`, the objective of the heads.
    pub total: f64,
}

/// Gradients with the same layout as [`DebiasModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// `dL_ID/dM - lambda * dL_ATT/dM`
    pub mapping: Affine,
    pub id_head: Affine,
    pub att_head: Affine,
}

/// The two parts of the mapping gradient before reversal is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingGradients {
    pub from_id: Affine,
    pub from_att: Affine,
}

impl DebiasModel {
    /// Mapping weights drawn uniformly with the Glorot bound; heads and
    /// biases start at zero.
    pub fn new(input_dim: usize, n_id: usize, n_att: usize, lambda: f64, seed: u64) -> Result<Self> {
        Self::init(input_dim, n_id, n_att, lambda, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn init(input_dim: usize, n_id: usize, n_att: usize, lambda: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        if input_dim < 2 || !input_dim.is_multiple_of(2) {
            return Err(Error::InvalidHyperparameters(format!(
                "input dimension must be even and at least 2, got {input_dim}"
            )));
        }
        if n_id == 0 || n_att == 0 {
            return Err(Error::InvalidHyperparameters("class counts must be positive".into()));
        }
        check_lambda(lambda)?;
        let h = input_dim / 2;
        let bound = (6.0 / (input_dim + h) as f64).sqrt();
        Ok(Self {
            lambda,
            mapping: Affine::uniform(h, input_dim, bound, rng),
            id_head: Affine::zeros(n_id, h),
            att_head: Affine::zeros(n_att, h),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mapping.shape[1]
    }

    pub fn output_dim(&self) -> usize {
        self.mapping.shape[0]
    }

    pub fn n_id(&self) -> usize {
        self.id_head.shape[0]
    }

    pub fn n_att(&self) -> usize {
        self.att_head.shape[0]
    }

    pub fn is_finite(&self) -> bool {
        self.mapping.is_finite() && self.id_head.is_finite() && self.att_head.is_finite()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Adapted feature only.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.mapping.apply(x).into_iter().map(f64::tanh).collect())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        let f_deb = self.transform(x)?;
        Ok(Forward {
            id_probs: softmax(&self.id_head.apply(&f_deb)),
            att_probs: softmax(&self.att_head.apply(&f_deb)),
            f_deb,
        })
    }

    fn check_batch(&self, batch: &[LabeledFeature]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("batch"));
        }
        for s in batch {
            self.check_dim(&s.x)?;
            if s.y_id >= self.n_id() || s.y_att >= self.n_att() {
                return Err(Error::InvalidHyperparameters(format!(
                    "label ({}, {}) outside ({}, {}) classes",
                    s.y_id,
                    s.y_att,
                    self.n_id(),
                    self.n_att()
                )));
            }
        }
        Ok(())
    }

    pub fn losses(&self, batch: &[LabeledFeature]) -> Result<Losses> {
        self.check_batch(batch)?;
        let (mut id, mut att) = (0.0, 0.0);
        for s in batch {
            let out = self.forward(&s.x)?;
            id -= out.id_probs[s.y_id].ln();
            att -= out.att_probs[s.y_att].ln();
        }
        let n = batch.len() as f64;
        let (id, att) = (id / n, att / n);
        Ok(Losses {
            id,
            att,
            total: id + att,
        })
    }

    /// Objective the mapping descends: `L_ID - lambda * L_ATT`.
    pub fn mapping_objective(&self, batch: &[LabeledFeature]) -> Result<f64> {
        let l = self.losses(batch)?;
        Ok(l.id - self.lambda * l.att)
    }

    /// Head gradients and both mapping gradient parts.
    pub fn gradient_parts(&self, batch: &[LabeledFeature]) -> Result<(Affine, Affine, MappingGradients)> {
        self.check_batch(batch)?;
        let (h, d) = (self.output_dim(), self.input_dim());
        let mut id_head = Affine::zeros(self.n_id(), h);
        let mut att_head = Affine::zeros(self.n_att(), h);
        let mut from_id = Affine::zeros(h, d);
        let mut from_att = Affine::zeros(h, d);
        let inv_n = 1.0 / batch.len() as f64;
        for s in batch {
            let out = self.forward(&s.x)?;
            let deriv: Vec<f64> = out.f_deb.iter().map(|f| 1.0 - f * f).collect();
            for (probs, y, head, grad_head, grad_map) in [
                (&out.id_probs, s.y_id, &self.id_head, &mut id_head, &mut from_id),
                (&out.att_probs, s.y_att, &self.att_head, &mut att_head, &mut from_att),
            ] {
                let mut delta: Vec<f64> = probs.iter().map(|p| p * inv_n).collect();
                delta[y] -= inv_n;
                grad_head.accumulate(&delta, &out.f_deb);
                let dz: Vec<f64> = head
                    .apply_transposed(&delta)
                    .iter()
                    .zip(&deriv)
                    .map(|(g, t)| g * t)
                    .collect();
                grad_map.accumulate(&dz, &s.x);
            }
        }
        Ok((id_head, att_head, MappingGradients { from_id, from_att }))
    }

    /// Gradients with reversal applied to the mapping.
    pub fn backward(&self, batch: &[LabeledFeature]) -> Result<Gradients> {
        let (id_head, att_head, parts) = self.gradient_parts(batch)?;
        let mut mapping = parts.from_id;
        mapping.axpy(-self.lambda, &parts.from_att);
        Ok(Gradients {
            mapping,
            id_head,
            att_head,
        })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidHyperparameters(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DebiasConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for DebiasConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            epochs: 10,
            lr: 1e-3,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub id: f64,
    pub att: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebiasFit {
    pub model: DebiasModel,
    /// Full-data losses after each epoch.
    pub trace: Vec<EpochLoss>,
}

/// Plain minibatch SGD with seeded shuffling. Each batch first steps both
/// heads, then steps the mapping against the updated heads. Class counts are
/// taken from the largest label present.
pub fn train_debias(data: &[LabeledFeature], cfg: DebiasConfig) -> Result<DebiasFit> {
    if data.is_empty() {
        return Err(Error::EmptyInput("training data"));
    }
    check_lambda(cfg.lambda)?;
    if !(cfg.lr.is_finite() && cfg.lr > 0.0) || cfg.batch_size == 0 {
        return Err(Error::InvalidHyperparameters(format!(
            "lr must be positive and batch size nonzero (lr {}, batch {})",
            cfg.lr, cfg.batch_size
        )));
    }
    let n_id = data.iter().map(|s| s.y_id).max().unwrap_or(0) + 1;
    let n_att = data.iter().map(|s| s.y_att).max().unwrap_or(0) + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = DebiasModel::init(data[0].x.len(), n_id, n_att, cfg.lambda, &mut rng)?;
    model.check_batch(data)?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<LabeledFeature> = chunk.iter().map(|&i| data[i].clone()).collect();
            let g = model.backward(&batch)?;
            model.id_head.axpy(-cfg.lr, &g.id_head);
            model.att_head.axpy(-cfg.lr, &g.att_head);
            let g = model.backward(&batch)?;
            model.mapping.axpy(-cfg.lr, &g.mapping);
        }
        let l = model.losses(data)?;
        if !l.id.is_finite() || !l.att.is_finite() || !model.is_finite() {
            return Err(Error::NonFinite("debias training loss"));
        }
        trace.push(EpochLoss {
            epoch: epoch + 1,
            id: l.id,
            att: l.att,
        });
    }
    Ok(DebiasFit { model, trace })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOptions {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub folds: usize,
    /// Training-time dropout probability; evaluation never drops.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            hidden: vec![512, 512, 256],
            epochs: 20,
            lr: 1e-3,
            batch_size: 32,
            folds: 5,
            dropout: 0.0,
            seed: 0,
        }
    }
}

/// Cross-validated probe result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub confusion: ConfusionMatrix,
}

/// ReLU network with a softmax output, trained with Adam.
struct Mlp {
    layers: Vec<Affine>,
    m: Vec<Affine>,
    v: Vec<Affine>,
    t: i32,
}

impl Mlp {
    fn new(sizes: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let layers: Vec<Affine> = sizes
            .windows(2)
            .map(|w| Affine::uniform(w[1], w[0], (6.0 / w[0] as f64).sqrt(), rng))
            .collect();
        let zeros: Vec<Affine> = layers.iter().map(|l| Affine::zeros(l.shape[0], l.shape[1])).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            layers,
            t: 0,
        }
    }

    /// Activations of every layer; the last entry holds the logits.
    fn activations(&self, x: &[f64], mask: Option<&mut dyn FnMut() -> f64>) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        let mut mask = mask;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(acts.last().expect("input present"));
            if i < last {
                for v in &mut z {
                    *v = v.max(0.0);
                    if let Some(m) = mask.as_deref_mut() {
                        *v *= m();
                    }
                }
            }
            acts.push(z);
        }
        acts
    }

    fn predict(&self, x: &[f64]) -> usize {
        let logits = self.activations(x, None).pop().expect("output layer");
        logits
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0
    }

    fn train_batch(&mut self, xs: &[&[f64]], ys: &[usize], lr: f64, dropout: f64, rng: &mut ChaCha8Rng) {
        let mut grads: Vec<Affine> = self.layers.iter().map(|l| Affine::zeros(l.shape[0], l.shape[1])).collect();
        let inv_n = 1.0 / xs.len() as f64;
        let keep = 1.0 - dropout;
        for (x, &y) in xs.iter().zip(ys) {
            let acts = if dropout > 0.0 {
                let mut mask = || if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 };
                self.activations(x, Some(&mut mask))
            } else {
                self.activations(x, None)
            };
            let mut delta = softmax(acts.last().expect("output layer"));
            delta[y] -= 1.0;
            delta.iter_mut().for_each(|d| *d *= inv_n);
            for li in (0..self.layers.len()).rev() {
                grads[li].accumulate(&delta, &acts[li]);
                if li > 0 {
                    let back = self.layers[li].apply_transposed(&delta);
                    // inactive (or dropped) units carry no gradient
                    delta = back
                        .iter()
                        .zip(&acts[li])
                        .map(|(g, a)| if *a > 0.0 { g / keep } else { 0.0 })
                        .collect();
                }
            }
        }
        self.adam(&grads, lr);
    }

    fn adam(&mut self, grads: &[Affine], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for ((layer, g), (m, v)) in self.layers.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for (((p, g), m), v) in layer.params_mut().zip(g.params()).zip(m.params_mut()).zip(v.params_mut()) {
                *m = B1 * *m + (1.0 - B1) * g;
                *v = B2 * *v + (1.0 - B2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
            }
        }
    }
}

/// Per-dimension mean and standard deviation from training rows.
fn standardizer(rows: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(*r) {
            *m += v / n;
        }
    }
    let mut sd = vec![0.0; d];
    for r in rows {
        for ((s, v), m) in sd.iter_mut().zip(*r).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    let sd = sd.into_iter().map(|s| if s > 1e-24 { s.sqrt() } else { 1.0 }).collect();
    (mean, sd)
}

/// Trains an MLP classifier per fold and reports held-out accuracy. Folds
/// come from a seeded shuffle dealt round-robin; inputs are standardized with
/// training-fold statistics.
pub fn probe_classifier(features: &[Vec<f64>], labels: &[usize], opts: &ProbeOptions) -> Result<ProbeReport> {
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: labels.len(),
        });
    }
    if features.is_empty() {
        return Err(Error::EmptyInput("probe features"));
    }
    let d = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    if opts.folds < 2 || opts.folds > features.len() {
        return Err(Error::InvalidFoldCount(opts.folds));
    }
    if !(0.0..1.0).contains(&opts.dropout) || opts.lr.is_nan() || opts.lr <= 0.0 || opts.batch_size == 0 {
        return Err(Error::InvalidHyperparameters("probe dropout, lr or batch size".into()));
    }
    let n_classes = labels.iter().max().copied().unwrap_or(0) + 1;
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed));
    let fold_of: Vec<usize> = {
        let mut f = vec![0; features.len()];
        for (pos, &i) in order.iter().enumerate() {
            f[i] = pos % opts.folds;
        }
        f
    };

    let per_fold: Vec<Vec<(usize, usize)>> = (0..opts.folds)
        .into_par_iter()
        .map(|fold| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1 + fold as u64));
            let train: Vec<usize> = order.iter().copied().filter(|&i| fold_of[i] != fold).collect();
            let test: Vec<usize> = (0..features.len()).filter(|&i| fold_of[i] == fold).collect();
            let (mean, sd) = standardizer(&train.iter().map(|&i| features[i].as_slice()).collect::<Vec<_>>());
            let scale = |v: &[f64]| -> Vec<f64> { v.iter().zip(&mean).zip(&sd).map(|((x, m), s)| (x - m) / s).collect() };
            let xs: Vec<Vec<f64>> = features.iter().map(|f| scale(f)).collect();

            let mut sizes = vec![d];
            sizes.extend(&opts.hidden);
            sizes.push(n_classes);
            let mut net = Mlp::new(&sizes, &mut rng);
            let mut idx = train.clone();
            for _ in 0..opts.epochs {
                idx.shuffle(&mut rng);
                for chunk in idx.chunks(opts.batch_size) {
                    let bx: Vec<&[f64]> = chunk.iter().map(|&i| xs[i].as_slice()).collect();
                    let by: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
                    net.train_batch(&bx, &by, opts.lr, opts.dropout, &mut rng);
                }
            }
            test.iter().map(|&i| (net.predict(&xs[i]), labels[i])).collect()
        })
        .collect();

    let fold_accuracies = per_fold
        .iter()
        .map(|f| f.iter().filter(|(p, t)| p == t).count() as f64 / f.len().max(1) as f64)
        .collect();
    let (pred, truth): (Vec<usize>, Vec<usize>) = per_fold.into_iter().flatten().unzip();
    let classes: Vec<usize> = (0..n_classes).collect();
    let confusion = confusion_matrix(&pred, &truth, &classes)?;
    Ok(ProbeReport {
        accuracy: confusion.accuracy(),
        fold_accuracies,
        confusion,
    })
}

/// How well subgroup labels can still be decoded from (adapted) features.
pub fn leakage_probe(features: &[Vec<f64>], subgroups: &[usize], opts: &ProbeOptions) -> Result<ProbeReport> {
    probe_classifier(features, subgroups, opts)
}
