//! Class-weighted, L2-regularized, squared-hinge linear classifier.
//!
//! The bias is handled as an extra weight on a constant-1 feature, so it is
//! regularized together with the rest of `w`:
//!
//! `J(w) = 1/2 |w|^2 + l+ sum_pos max(0, 1 - w.x)^2 + l- sum_neg max(0, 1 + w.x)^2`

use serde::{Deserialize, Serialize};

use crate::embedding::dot;
use crate::error::{Error, Result};

/// Default base regularization constant.
pub const DEFAULT_LAMBDA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmOptions {
    /// Stop once the gradient norm falls below `tol` times its value at `w = 0`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
        }
    }
}

/// Per-class constants inversely proportional to class frequency:
/// `l+ = l (N+ + N-) / (2 N+)` and `l- = l (N+ + N-) / (2 N-)`.
pub fn class_weights(n_pos: usize, n_neg: usize, lambda: f64) -> Result<(f64, f64)> {
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::EmptyClass);
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::NonFinite("svm lambda"));
    }
    let total = lambda * (n_pos + n_neg) as f64;
    Ok((total / (2 * n_pos) as f64, total / (2 * n_neg) as f64))
}

/// A trained linear model; `w` has one more entry than the input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub lambda_pos: f64,
    pub lambda_neg: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LinearModel {
    /// Input dimension, excluding the bias coordinate.
    pub fn dim(&self) -> usize {
        self.w.len() - 1
    }

    pub fn bias(&self) -> f64 {
        self.w[self.dim()]
    }

    /// `w . [x; 1]`
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(dot(&self.w[..x.len()], x) + self.bias())
    }
}

/// Training data with the constant feature appended and class constants fixed.
#[derive(Debug, Clone)]
pub struct SvmProblem {
    rows: Vec<Vec<f64>>,
    /// +1 for positives, -1 for negatives.
    signs: Vec<f64>,
    costs: Vec<f64>,
    lambda_pos: f64,
    lambda_neg: f64,
}

impl SvmProblem {
    pub fn new<P: AsRef<[f64]>, N: AsRef<[f64]>>(pos: &[P], neg: &[N], lambda: f64) -> Result<Self> {
        let (lambda_pos, lambda_neg) = class_weights(pos.len(), neg.len(), lambda)?;
        let dim = pos[0].as_ref().len();
        let mut rows = Vec::with_capacity(pos.len() + neg.len());
        let mut signs = Vec::with_capacity(rows.capacity());
        let mut costs = Vec::with_capacity(rows.capacity());
        let labeled = pos
            .iter()
            .map(|v| (v.as_ref(), 1.0, lambda_pos))
            .chain(neg.iter().map(|v| (v.as_ref(), -1.0, lambda_neg)));
        for (v, sign, cost) in labeled {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|a| !a.is_finite()) {
                return Err(Error::NonFinite("svm training vector"));
            }
            let mut row = Vec::with_capacity(dim + 1);
            row.extend_from_slice(v);
            row.push(1.0);
            rows.push(row);
            signs.push(sign);
            costs.push(cost);
        }
        Ok(Self {
            rows,
            signs,
            costs,
            lambda_pos,
            lambda_neg,
        })
    }

    /// Length of `w`, including the bias coordinate.
    pub fn n_weights(&self) -> usize {
        self.rows[0].len()
    }

    pub fn objective(&self, w: &[f64]) -> f64 {
        let data: f64 = self
            .rows
            .iter()
            .zip(&self.signs)
            .zip(&self.costs)
            .map(|((x, y), c)| {
                let slack = (1.0 - y * dot(w, x)).max(0.0);
                c * slack * slack
            })
            .sum();
        0.5 * dot(w, w) + data
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g = w.to_vec();
        for ((x, y), c) in self.rows.iter().zip(&self.signs).zip(&self.costs) {
            let slack = 1.0 - y * dot(w, x);
            if slack > 0.0 {
                let scale = -2.0 * c * y * slack;
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi += scale * xi;
                }
            }
        }
        g
    }

    /// Gradient descent from `w = 0`. Each step starts from a Barzilai-Borwein
    /// length and backtracks until the Armijo condition holds.
    pub fn solve(&self, opts: SvmOptions) -> LinearModel {
        const ARMIJO: f64 = 1e-4;
        let n = self.n_weights();
        let mut w = vec![0.0; n];
        let mut f = self.objective(&w);
        let mut g = self.gradient(&w);
        let g0 = dot(&g, &g).sqrt().max(f64::MIN_POSITIVE);
        // curvature bound of the data term gives a safe first step
        let lipschitz = 1.0
            + 2.0
                * self
                    .rows
                    .iter()
                    .zip(&self.costs)
                    .map(|(x, c)| c * dot(x, x))
                    .sum::<f64>();
        let mut step = 1.0 / lipschitz;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < opts.max_iter {
            let gnorm2 = dot(&g, &g);
            if gnorm2.sqrt() <= opts.tol * g0 {
                converged = true;
                break;
            }
            iterations += 1;
            let mut t = step;
            let (w_next, f_next) = loop {
                let cand: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - t * gi).collect();
                let fc = self.objective(&cand);
                if fc <= f - ARMIJO * t * gnorm2 || t < 1e-20 {
                    break (cand, fc);
                }
                t *= 0.5;
            };
            if f_next >= f {
                // no representable decrease left
                converged = true;
                break;
            }
            let g_next = self.gradient(&w_next);
            let s: Vec<f64> = w_next.iter().zip(&w).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            step = if sy > 0.0 { dot(&s, &s) / sy } else { 1.0 / lipschitz };
            w = w_next;
            f = f_next;
            g = g_next;
        }
        LinearModel {
            w,
            lambda_pos: self.lambda_pos,
            lambda_neg: self.lambda_neg,
            objective: f,
            iterations,
            converged,
        }
    }
}

/// Trains a model separating `pos` from `neg`.
pub fn train_cwsvm<P: AsRef<[f64]>, N: AsRef<[f64]>>(
    pos: &[P],
    neg: &[N],
    lambda: f64,
    opts: SvmOptions,
) -> Result<LinearModel> {
    Ok(SvmProblem::new(pos, neg, lambda)?.solve(opts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_weight_examples() {
        assert_eq!(class_weights(5, 95, 10.0).unwrap(), (100.0, 100.0 / 19.0));
        assert_eq!(class_weights(7, 7, 3.5).unwrap(), (3.5, 3.5));
        assert!(matches!(class_weights(0, 3, 1.0), Err(Error::EmptyClass)));
        assert_eq!(DEFAULT_LAMBDA, 10.0);
    }

    #[test]
    fn separates_points_on_a_line() {
        let m = train_cwsvm(&[[2.0]], &[[-2.0]], DEFAULT_LAMBDA, SvmOptions::default()).unwrap();
        assert!(m.converged);
        assert!(m.decision(&[2.0]).unwrap() > 0.0);
        assert!(m.decision(&[-2.0]).unwrap() < 0.0);
    }

    #[test]
    fn mirrored_data_has_zero_bias() {
        let pos = [[1.0, 2.0], [2.0, 0.5], [0.3, 1.1]];
        let neg: Vec<[f64; 2]> = pos.iter().map(|p| [-p[0], -p[1]]).collect();
        let m = train_cwsvm(&pos, &neg, 1.0, SvmOptions::default()).unwrap();
        assert!(m.bias().abs() < 1e-8);
    }

    #[test]
    fn decision_examples() {
        let m = LinearModel {
            w: vec![1.0, 0.0],
            lambda_pos: 1.0,
            lambda_neg: 1.0,
            objective: 0.0,
            iterations: 0,
            converged: true,
        };
        assert_eq!(m.decision(&[3.0]).unwrap(), 3.0);
        let m = LinearModel { w: vec![0.5, -0.25], ..m };
        assert_eq!(m.decision(&[0.0]).unwrap(), -0.25);
        assert!(m.decision(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let empty: [[f64; 1]; 0] = [];
        assert!(matches!(train_cwsvm(&empty, &[[1.0]], 1.0, SvmOptions::default()), Err(Error::EmptyClass)));
        assert!(matches!(
            train_cwsvm(&[[f64::NAN]], &[[1.0]], 1.0, SvmOptions::default()),
            Err(Error::NonFinite(_))
        ));
    }
}
