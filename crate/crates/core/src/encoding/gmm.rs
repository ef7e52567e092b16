//! Diagonal-covariance Gaussian mixtures fitted by EM.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Channel;
use crate::par::{self, Execution, REDUCE_CHUNK};

/// Mixture weights are kept at or above this before renormalizing.
pub const WEIGHT_FLOOR: f64 = 1e-12;
/// Variances are floored at this fraction of the average data variance.
pub const VARIANCE_FLOOR_RATIO: f64 = 1e-4;
const KMEANS_ITERS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmParams {
    pub components: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GmmParams {
    fn default() -> Self {
        GmmParams {
            components: 256,
            tol: 1e-5,
            max_iter: 200,
        }
    }
}

/// One channel's mixture. `means` and `variances` are `k × dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmChannel {
    pub name: String,
    pub k: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: GmmChannel,
    /// Mean per-sample log-likelihood of every successive parameter set.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
    pub variance_floor: f64,
}

/// Per-component constants for evaluating log densities.
pub(crate) struct Prepared {
    pub log_norm: Vec<f64>,
    pub inv_var: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl GmmChannel {
    pub(crate) fn prepare(&self) -> Prepared {
        let d = self.dim;
        let log_norm = (0..self.k)
            .map(|c| {
                let vars = &self.variances[c * d..(c + 1) * d];
                self.weights[c].ln() - 0.5 * vars.iter().map(|v| (2.0 * PI * v).ln()).sum::<f64>()
            })
            .collect();
        Prepared {
            log_norm,
            inv_var: self.variances.iter().map(|v| 1.0 / v).collect(),
            inv_std: self.variances.iter().map(|v| 1.0 / v.sqrt()).collect(),
        }
    }

    /// Writes the posteriors of `x` into `gamma` and returns `log p(x)`.
    pub(crate) fn posteriors_into(&self, prep: &Prepared, x: &[f64], gamma: &mut [f64]) -> f64 {
        let d = self.dim;
        let mut max = f64::NEG_INFINITY;
        for (c, g) in gamma.iter_mut().enumerate() {
            let mu = &self.means[c * d..(c + 1) * d];
            let iv = &prep.inv_var[c * d..(c + 1) * d];
            let mut q = 0f64;
            for j in 0..d {
                let e = x[j] - mu[j];
                q += e * e * iv[j];
            }
            *g = prep.log_norm[c] - 0.5 * q;
            max = max.max(*g);
        }
        let mut s = 0f64;
        for g in gamma.iter_mut() {
            *g = (*g - max).exp();
            s += *g;
        }
        for g in gamma.iter_mut() {
            *g /= s;
        }
        max + s.ln()
    }

    pub fn posteriors(&self, x: &[f64]) -> Vec<f64> {
        let mut gamma = vec![0f64; self.k];
        self.posteriors_into(&self.prepare(), x, &mut gamma);
        gamma
    }

    /// Mean log-likelihood of the rows of `data` (`n × dim`).
    pub fn mean_log_likelihood(&self, data: &[f64], exec: Execution) -> f64 {
        let n = data.len() / self.dim;
        if n == 0 {
            return 0.0;
        }
        let prep = self.prepare();
        let parts = par::chunked_map(exec, n, REDUCE_CHUNK, |r| {
            let mut gamma = vec![0f64; self.k];
            r.map(|i| self.posteriors_into(&prep, &data[i * self.dim..(i + 1) * self.dim], &mut gamma))
                .sum::<f64>()
        });
        parts.into_iter().sum::<f64>() / n as f64
    }

    /// Rounds every parameter to f32 precision and renormalizes the weights,
    /// which is exactly what a save/load cycle does.
    pub fn quantize(&mut self) {
        for v in self.means.iter_mut().chain(&mut self.variances) {
            *v = *v as f32 as f64;
        }
        // Iterate to a fixed point so that a second save/load cycle changes nothing.
        for _ in 0..8 {
            let before = self.weights.clone();
            self.weights.iter_mut().for_each(|w| *w = *w as f32 as f64);
            let s: f64 = self.weights.iter().sum();
            self.weights.iter_mut().for_each(|w| *w /= s);
            if self.weights == before {
                break;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (k, d) = (self.k, self.dim);
        if k == 0 || d == 0 || self.weights.len() != k || self.means.len() != k * d || self.variances.len() != k * d {
            return Err(Error::InvalidArgument(format!("mixture {} has inconsistent shapes", self.name)));
        }
        let finite = self.weights.iter().chain(&self.means).chain(&self.variances).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("mixture parameters"));
        }
        if self.weights.iter().any(|&w| w <= 0.0) || self.variances.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mixture {} has non-positive weights or variances",
                self.name
            )));
        }
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp(data: &[f64], n: usize, d: usize, k: usize, rng: &mut ChaCha8Rng, exec: Execution) -> Vec<f64> {
    let mut centers = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(&data[first * d..(first + 1) * d]);
    let mut best: Vec<f64> = par::map_range(exec, n, |i| sq_dist(&data[i * d..(i + 1) * d], &centers[..d]));
    for c in 1..k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &b) in best.iter().enumerate() {
                acc += b;
                if acc > target && b > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.extend_from_slice(&data[pick * d..(pick + 1) * d]);
        let new = &centers[c * d..(c + 1) * d];
        let dists = par::map_range(exec, n, |i| sq_dist(&data[i * d..(i + 1) * d], new));
        for (b, nd) in best.iter_mut().zip(dists) {
            if nd < *b {
                *b = nd;
            }
        }
    }
    centers
}

fn nearest(x: &[f64], centers: &[f64], d: usize) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (c, mu) in centers.chunks_exact(d).enumerate() {
        let dist = sq_dist(x, mu);
        if dist < best.0 {
            best = (dist, c);
        }
    }
    best.1
}

/// Sums of `γ`, `γ(x−s)` and `γ(x−s)²` per component, with `s` the shift.
struct Stats {
    count: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
    ll: f64,
}

impl Stats {
    fn new(k: usize, d: usize) -> Self {
        Stats {
            count: vec![0.0; k],
            first: vec![0.0; k * d],
            second: vec![0.0; k * d],
            ll: 0.0,
        }
    }

    fn add(&mut self, other: &Stats) {
        for (a, b) in self.count.iter_mut().zip(&other.count) {
            *a += b;
        }
        for (a, b) in self.first.iter_mut().zip(&other.first) {
            *a += b;
        }
        for (a, b) in self.second.iter_mut().zip(&other.second) {
            *a += b;
        }
        self.ll += other.ll;
    }

    fn push(&mut self, c: usize, g: f64, x: &[f64], shift: &[f64]) {
        let d = x.len();
        self.count[c] += g;
        let (f, s) = (&mut self.first[c * d..(c + 1) * d], &mut self.second[c * d..(c + 1) * d]);
        for j in 0..d {
            let e = x[j] - shift[j];
            f[j] += g * e;
            s[j] += g * e * e;
        }
    }
}

fn reduce(parts: Vec<Stats>, k: usize, d: usize) -> Stats {
    let mut total = Stats::new(k, d);
    for p in &parts {
        total.add(p);
    }
    total
}

/// Turns accumulated statistics into mixture parameters.
fn m_step(stats: &Stats, shift: &[f64], n: usize, floor: f64, fallback_var: &[f64], model: &mut GmmChannel) {
    let (k, d) = (model.k, model.dim);
    for c in 0..k {
        let nk = stats.count[c];
        model.weights[c] = (nk / n as f64).max(WEIGHT_FLOOR);
        if nk <= 0.0 {
            for (v, f) in model.variances[c * d..(c + 1) * d].iter_mut().zip(fallback_var) {
                *v = f.max(floor);
            }
            continue;
        }
        for j in 0..d {
            let m1 = stats.first[c * d + j] / nk;
            let m2 = stats.second[c * d + j] / nk;
            model.means[c * d + j] = shift[c * d + j] + m1;
            model.variances[c * d + j] = (m2 - m1 * m1).max(floor);
        }
    }
    let s: f64 = model.weights.iter().sum();
    model.weights.iter_mut().for_each(|w| *w /= s);
}

/// Fits a `params.components`-mixture to the rows of `samples`.
pub fn fit_gmm(samples: &Channel, params: &GmmParams, seed: u64, exec: Execution) -> Result<GmmFit> {
    let (n, d, k) = (samples.rows(), samples.dim, params.components);
    if k == 0 {
        return Err(Error::InvalidArgument("mixture needs at least one component".into()));
    }
    if n < k {
        return Err(Error::InsufficientSamples {
            channel: samples.name.clone(),
            detail: format!("{n} samples for {k} components"),
        });
    }
    if samples.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mixture samples"));
    }
    let data: Vec<f64> = samples.data.iter().map(|&v| v as f64).collect();

    let mut mean = vec![0f64; d];
    for x in data.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut data_var = vec![0f64; d];
    for x in data.chunks_exact(d) {
        for j in 0..d {
            data_var[j] += (x[j] - mean[j]) * (x[j] - mean[j]);
        }
    }
    data_var.iter_mut().for_each(|v| *v /= n as f64);
    let avg_var = data_var.iter().sum::<f64>() / d as f64;
    let floor = (VARIANCE_FLOOR_RATIO * avg_var).max(1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_pp(&data, n, d, k, &mut rng, exec);
    let mut assign = vec![0usize; n];
    for _ in 0..KMEANS_ITERS {
        assign = par::map_range(exec, n, |i| nearest(&data[i * d..(i + 1) * d], &centers, d));
        let mut sums = vec![0f64; k * d];
        let mut counts = vec![0usize; k];
        for (i, &c) in assign.iter().enumerate() {
            counts[c] += 1;
            for j in 0..d {
                sums[c * d + j] += data[i * d + j];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    centers[c * d + j] = sums[c * d + j] / counts[c] as f64;
                }
            }
        }
    }
    let mut stats = Stats::new(k, d);
    for (i, &c) in assign.iter().enumerate() {
        stats.push(c, 1.0, &data[i * d..(i + 1) * d], &centers[c * d..(c + 1) * d]);
    }
    let mut model = GmmChannel {
        name: samples.name.clone(),
        k,
        dim: d,
        weights: vec![0.0; k],
        means: centers.clone(),
        variances: vec![0.0; k * d],
    };
    m_step(&stats, &centers, n, floor, &data_var, &mut model);

    let mut curve = Vec::new();
    let mut converged = false;
    for iter in 0..=params.max_iter {
        let prep = model.prepare();
        let shift = &model.means;
        let parts = par::chunked_map(exec, n, REDUCE_CHUNK, |r| {
            let mut s = Stats::new(k, d);
            let mut gamma = vec![0f64; k];
            for i in r {
                let x = &data[i * d..(i + 1) * d];
                s.ll += model.posteriors_into(&prep, x, &mut gamma);
                for (c, &g) in gamma.iter().enumerate() {
                    if g > 0.0 {
                        s.push(c, g, x, &shift[c * d..(c + 1) * d]);
                    }
                }
            }
            s
        });
        let stats = reduce(parts, k, d);
        let ll = stats.ll / n as f64;
        if let Some(&prev) = curve.last() {
            if ll - prev < params.tol {
                curve.push(ll);
                converged = true;
                break;
            }
        }
        curve.push(ll);
        if iter == params.max_iter {
            break;
        }
        let shift = model.means.clone();
        m_step(&stats, &shift, n, floor, &data_var, &mut model);
    }
    Ok(GmmFit {
        model,
        log_likelihood: curve,
        converged,
        variance_floor: floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn blobs(centers: &[[f64; 2]], per: usize, sigma: f64, seed: u64) -> Channel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::new();
        for c in centers {
            for _ in 0..per {
                for &m in c {
                    let z: f64 = rng.sample(StandardNormal);
                    data.push((m + sigma * z) as f32);
                }
            }
        }
        Channel::new("x", 2, data).unwrap()
    }

    fn params(k: usize) -> GmmParams {
        GmmParams {
            components: k,
            ..GmmParams::default()
        }
    }

    #[test]
    fn single_component_is_closed_form() {
        let ch = blobs(&[[1.0, -2.0]], 500, 0.7, 4);
        let fit = fit_gmm(&ch, &params(1), 0, Execution::Parallel).unwrap();
        let n = ch.rows() as f64;
        for j in 0..2 {
            let col: Vec<f64> = (0..ch.rows()).map(|i| ch.row(i)[j] as f64).collect();
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!((fit.model.means[j] - mean).abs() < 1e-9);
            assert!((fit.model.variances[j] - var).abs() < 1e-9);
        }
        assert_eq!(fit.model.weights, vec![1.0]);
    }

    #[test]
    fn separated_clusters_recovered() {
        let ch = blobs(&[[0.0, 0.0], [20.0, 0.0]], 1000, 1.0, 11);
        let fit = fit_gmm(&ch, &params(2), 5, Execution::Parallel).unwrap();
        let m = &fit.model;
        let mut order = [0, 1];
        order.sort_by(|&a, &b| m.means[a * 2].total_cmp(&m.means[b * 2]));
        for (c, truth) in order.iter().zip([[0.0, 0.0], [20.0, 0.0]]) {
            assert!((m.means[c * 2] - truth[0]).abs() < 0.1);
            assert!((m.means[c * 2 + 1] - truth[1]).abs() < 0.1);
            assert!((m.weights[*c] - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn more_components_than_samples() {
        let ch = Channel::new("few", 1, vec![1.0, 2.0, 3.0]).unwrap();
        let err = fit_gmm(&ch, &params(5), 0, Execution::Sequential).unwrap_err();
        assert!(err.to_string().contains("few"));
    }

    #[test]
    fn likelihood_is_monotone_and_posteriors_sum_to_one() {
        let ch = blobs(&[[0.0, 0.0], [3.0, 1.0], [-2.0, 4.0]], 300, 1.2, 2);
        let fit = fit_gmm(&ch, &params(6), 1, Execution::Parallel).unwrap();
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{w:?}");
        }
        assert!(fit.model.variances.iter().all(|&v| v >= fit.variance_floor));
        assert!((fit.model.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for i in 0..50 {
            let x: Vec<f64> = ch.row(i).iter().map(|&v| v as f64).collect();
            let g = fit.model.posteriors(&x);
            assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fit_is_independent_of_execution_mode() {
        let ch = blobs(&[[0.0, 0.0], [5.0, 5.0]], 700, 1.0, 8);
        let a = fit_gmm(&ch, &params(4), 3, Execution::Sequential).unwrap();
        let b = fit_gmm(&ch, &params(4), 3, Execution::Parallel).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.log_likelihood, b.log_likelihood);
    }
}
