//! One-vs-all linear SVMs trained by dual coordinate descent.
//!
//! Each binary problem minimizes `½‖w‖² + C Σ max(0, 1 − yᵢ w·x̃ᵢ)` where
//! `x̃ = [x, 1]` carries the bias as an extra, regularized feature.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binio::{self, put_f32, put_len, put_name, Reader};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub const MODEL_MAGIC: &[u8; 4] = b"TSVM";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    /// Training stops once the duality gap falls to this value.
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 100.0,
            tol: 1e-4,
            max_sweeps: 20_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub classes: Vec<String>,
    pub dim: usize,
    pub c: f64,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

/// Outcome of one binary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub primal: f64,
    pub dual: f64,
    pub sweeps: usize,
    /// Dual objective after every sweep.
    pub dual_curve: Vec<f64>,
}

impl BinaryFit {
    pub fn gap(&self) -> f64 {
        self.primal - self.dual
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves one binary problem with labels `y ∈ {−1, +1}`.
pub fn train_binary(x: &[Vec<f64>], y: &[f64], params: &SvmParams, seed: u64) -> BinaryFit {
    let n = x.len();
    let d = x.first().map_or(0, Vec::len);
    let c = params.c;
    // Last entry of `w` is the bias.
    let mut w = vec![0f64; d + 1];
    let mut alpha = vec![0f64; n];
    let q: Vec<f64> = x.iter().map(|xi| dot(xi, xi) + 1.0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut curve = Vec::new();
    let objectives = |w: &[f64], alpha: &[f64]| {
        let ww = dot(w, w);
        let hinge: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, &yi)| (1.0 - yi * (dot(&w[..d], xi) + w[d])).max(0.0))
            .sum();
        (0.5 * ww + c * hinge, alpha.iter().sum::<f64>() - 0.5 * ww)
    };
    let mut sweeps = 0;
    let (mut primal, mut dual) = objectives(&w, &alpha);
    while sweeps < params.max_sweeps {
        order.shuffle(&mut rng);
        for &i in &order {
            let xi = &x[i];
            let g = y[i] * (dot(&w[..d], xi) + w[d]) - 1.0;
            let old = alpha[i];
            let new = (old - g / q[i]).clamp(0.0, c);
            if new != old {
                let s = (new - old) * y[i];
                for (wj, xj) in w.iter_mut().zip(xi) {
                    *wj += s * xj;
                }
                w[d] += s;
                alpha[i] = new;
            }
        }
        sweeps += 1;
        (primal, dual) = objectives(&w, &alpha);
        curve.push(dual);
        if primal - dual <= params.tol {
            break;
        }
    }
    let bias = w.pop().unwrap_or(0.0);
    BinaryFit {
        weights: w,
        bias,
        primal,
        dual,
        sweeps,
        dual_curve: curve,
    }
}

/// Trains one binary problem per class (sorted label order) and returns the
/// model with the per-class fits.
pub fn train_one_vs_all(
    x: &[Vec<f64>],
    labels: &[String],
    params: &SvmParams,
    exec: Execution,
) -> Result<(LinearModel, Vec<BinaryFit>)> {
    if x.len() != labels.len() {
        return Err(Error::Dim {
            expected: x.len(),
            got: labels.len(),
        });
    }
    let dim = x.first().map_or(0, Vec::len);
    if let Some(bad) = x.iter().find(|r| r.len() != dim) {
        return Err(Error::Dim {
            expected: dim,
            got: bad.len(),
        });
    }
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "one-vs-all training needs at least 2 classes, got {}",
            classes.len()
        )));
    }
    let fits = par::map_range(exec, classes.len(), |k| {
        let y: Vec<f64> = labels.iter().map(|l| if *l == classes[k] { 1.0 } else { -1.0 }).collect();
        train_binary(x, &y, params, params.seed.wrapping_add(k as u64))
    });
    let model = LinearModel {
        classes,
        dim,
        c: params.c,
        weights: fits.iter().map(|f| f.weights.clone()).collect(),
        biases: fits.iter().map(|f| f.bias).collect(),
    };
    Ok((model, fits))
}

impl LinearModel {
    /// Scores `w·x + b` per sample and class.
    pub fn predict_scores(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        x.iter()
            .map(|xi| {
                if xi.len() != self.dim {
                    return Err(Error::Dim {
                        expected: self.dim,
                        got: xi.len(),
                    });
                }
                Ok(self.weights.iter().zip(&self.biases).map(|(w, b)| dot(w, xi) + b).collect())
            })
            .collect()
    }

    /// Index of the highest score; the first class wins ties.
    pub fn argmax(scores: &[f64]) -> usize {
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        best
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<String>> {
        Ok(self
            .predict_scores(x)?
            .iter()
            .map(|s| self.classes[Self::argmax(s)].clone())
            .collect())
    }

    /// Rounds parameters to f32, as stored on disk.
    pub fn quantize(&mut self) {
        for v in self.weights.iter_mut().flatten().chain(&mut self.biases) {
            *v = *v as f32 as f64;
        }
        self.c = self.c as f32 as f64;
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        put_len(&mut out, self.classes.len())?;
        for c in &self.classes {
            put_name(&mut out, c);
        }
        put_len(&mut out, self.dim)?;
        put_f32(&mut out, self.c as f32);
        for (w, &b) in self.weights.iter().zip(&self.biases) {
            for &v in w {
                put_f32(&mut out, v as f32);
            }
            put_f32(&mut out, b as f32);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<LinearModel> {
        let mut r = Reader::new(bytes, "svm model", origin);
        r.magic(MODEL_MAGIC)?;
        let n = r.len()?;
        let classes = (0..n).map(|_| r.name()).collect::<Result<Vec<_>>>()?;
        let dim = r.len()?;
        let c = r.f32()? as f64;
        let mut weights = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        for _ in 0..n {
            weights.push(r.f32_vec(dim)?.into_iter().map(f64::from).collect());
            biases.push(r.f32()? as f64);
        }
        r.finish()?;
        Ok(LinearModel {
            classes,
            dim,
            c,
            weights,
            biases,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        binio::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<LinearModel> {
        let bytes = binio::read_file(path)?;
        LinearModel::from_bytes(&bytes, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn separable(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = dot(&normal, &normal).sqrt();
        let mut x = Vec::new();
        let mut labels = Vec::new();
        while x.len() < n {
            let p: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s = dot(&p, &normal) / norm;
            if s.abs() < 0.5 {
                continue;
            }
            labels.push(if s > 0.0 { "pos" } else { "neg" }.to_string());
            x.push(p);
        }
        (x, labels)
    }

    #[test]
    fn separable_data_fits_perfectly() {
        let (x, labels) = separable(80, 5, 1);
        let (model, fits) = train_one_vs_all(&x, &labels, &SvmParams::default(), Execution::Parallel).unwrap();
        assert_eq!(model.predict(&x).unwrap(), labels);
        for f in &fits {
            assert!(f.gap() <= 1e-4, "gap {}", f.gap());
            for w in f.dual_curve.windows(2) {
                assert!(w[1] >= w[0] - 1e-9);
            }
        }
    }

    #[test]
    fn duplicated_samples_give_same_boundary() {
        let (x, labels) = separable(40, 4, 2);
        let params = SvmParams {
            tol: 1e-10,
            max_sweeps: 200_000,
            ..SvmParams::default()
        };
        let (a, _) = train_one_vs_all(&x, &labels, &params, Execution::Sequential).unwrap();
        let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let l2: Vec<String> = labels.iter().chain(&labels).cloned().collect();
        let (b, _) = train_one_vs_all(&x2, &l2, &params, Execution::Sequential).unwrap();
        for k in 0..2 {
            let mut wa = a.weights[k].clone();
            wa.push(a.biases[k]);
            let mut wb = b.weights[k].clone();
            wb.push(b.biases[k]);
            let cos = dot(&wa, &wb) / (dot(&wa, &wa).sqrt() * dot(&wb, &wb).sqrt());
            assert!(1.0 - cos < 1e-6, "cosine distance {}", 1.0 - cos);
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        let labels = vec!["a".to_string(), "a".to_string()];
        assert!(train_one_vs_all(&x, &labels, &SvmParams::default(), Execution::Sequential).is_err());
    }

    #[test]
    fn prediction_examples() {
        let model = LinearModel {
            classes: vec!["A".into(), "B".into()],
            dim: 2,
            c: 100.0,
            weights: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            biases: vec![0.0, 0.0],
        };
        assert_eq!(model.predict(&[vec![1.0, 0.0]]).unwrap(), vec!["A"]);
        assert_eq!(model.predict(&[vec![0.5, 0.5]]).unwrap(), vec!["A"]);
        assert!(model.predict(&[]).unwrap().is_empty());
        assert!(model.predict_scores(&[vec![1.0]]).is_err());
    }

    #[test]
    fn model_round_trip() {
        let (x, labels) = separable(30, 3, 5);
        let (mut model, _) = train_one_vs_all(&x, &labels, &SvmParams::default(), Execution::Parallel).unwrap();
        model.quantize();
        let back = LinearModel::from_bytes(&model.to_bytes().unwrap(), "mem").unwrap();
        assert_eq!(back, model);
    }
}
