//! Fisher vector gradients with respect to means and variances.

use crate::error::{Error, Result};
use crate::par::{self, Execution, REDUCE_CHUNK};

use super::gmm::GmmChannel;

/// Raw Fisher vector of the `dim`-dimensional rows in `rows`, laid out as
/// `[G_μ (k × d) | G_σ (k × d)]`. No rows give the zero vector.
pub fn fisher_encode(rows: &[f32], dim: usize, gmm: &GmmChannel, exec: Execution) -> Result<Vec<f64>> {
    if dim != gmm.dim {
        return Err(Error::Dim {
            expected: gmm.dim,
            got: dim,
        });
    }
    let (k, d) = (gmm.k, gmm.dim);
    let n = rows.len() / d;
    let mut out = vec![0f64; 2 * k * d];
    if n == 0 {
        return Ok(out);
    }
    let prep = gmm.prepare();
    let parts = par::chunked_map(exec, n, REDUCE_CHUNK, |r| {
        let mut acc = vec![0f64; 2 * k * d];
        let mut gamma = vec![0f64; k];
        let mut x = vec![0f64; d];
        for i in r {
            for (a, &b) in x.iter_mut().zip(&rows[i * d..(i + 1) * d]) {
                *a = b as f64;
            }
            gmm.posteriors_into(&prep, &x, &mut gamma);
            for (c, &g) in gamma.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let mu = &gmm.means[c * d..(c + 1) * d];
                let is = &prep.inv_std[c * d..(c + 1) * d];
                let (gm, gs) = acc.split_at_mut(k * d);
                for j in 0..d {
                    let z = (x[j] - mu[j]) * is[j];
                    gm[c * d + j] += g * z;
                    gs[c * d + j] += g * (z * z - 1.0);
                }
            }
        }
        acc
    });
    for p in &parts {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    for c in 0..k {
        let w = gmm.weights[c];
        let (sm, ss) = (1.0 / (n as f64 * w.sqrt()), 1.0 / (n as f64 * (2.0 * w).sqrt()));
        for j in 0..d {
            out[c * d + j] *= sm;
            out[k * d + c * d + j] *= ss;
        }
    }
    Ok(out)
}

/// Signed square root of every entry, then L2 normalization. The zero vector
/// maps to itself.
pub fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("encoding"));
    }
    let mut out: Vec<f64> = v.iter().map(|&x| x.signum() * x.abs().sqrt()).collect();
    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        out.iter_mut().for_each(|x| *x /= norm);
    } else {
        out.iter_mut().for_each(|x| *x = 0.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_gmm(k: usize, d: usize, spacing: f64) -> GmmChannel {
        GmmChannel {
            name: "t".into(),
            k,
            dim: d,
            weights: vec![1.0 / k as f64; k],
            means: (0..k * d).map(|i| spacing * (i / d) as f64 + 0.125 * (i % d) as f64).collect(),
            variances: (0..k * d).map(|i| 0.5 + 0.25 * (i % 3) as f64).collect(),
        }
    }

    /// Direct evaluation of the gradient formulas, one row at a time.
    fn oracle(rows: &[Vec<f64>], g: &GmmChannel) -> Vec<f64> {
        let (k, d, n) = (g.k, g.dim, rows.len() as f64);
        let mut out = vec![0f64; 2 * k * d];
        for x in rows {
            let logp: Vec<f64> = (0..k)
                .map(|c| {
                    let mut s = g.weights[c].ln();
                    for (j, xj) in x.iter().enumerate() {
                        let v = g.variances[c * d + j];
                        s += -0.5 * (2.0 * std::f64::consts::PI * v).ln() - 0.5 * (xj - g.means[c * d + j]).powi(2) / v;
                    }
                    s
                })
                .collect();
            let m = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logp.iter().map(|l| (l - m).exp()).sum();
            for c in 0..k {
                let gamma = (logp[c] - m).exp() / z;
                for j in 0..d {
                    let sd = g.variances[c * d + j].sqrt();
                    let u = (x[j] - g.means[c * d + j]) / sd;
                    out[c * d + j] += gamma * u / (n * g.weights[c].sqrt());
                    out[k * d + c * d + j] += gamma * (u * u - 1.0) / (n * (2.0 * g.weights[c]).sqrt());
                }
            }
        }
        out
    }

    #[test]
    fn length_and_empty_input() {
        let g = toy_gmm(8, 10, 1.0);
        let v = fisher_encode(&[], 10, &g, Execution::Sequential).unwrap();
        assert_eq!(v.len(), 160);
        assert!(v.iter().all(|&x| x == 0.0));
        assert!(fisher_encode(&[0.0; 9], 9, &g, Execution::Sequential).is_err());
    }

    #[test]
    fn rows_at_means_zero_the_mean_block() {
        let g = toy_gmm(4, 3, 50.0);
        let rows: Vec<f32> = (0..5).flat_map(|_| g.means.iter().map(|&m| m as f32)).collect();
        let v = fisher_encode(&rows, 3, &g, Execution::Parallel).unwrap();
        assert!(v[..12].iter().all(|x| x.abs() < 1e-6), "{:?}", &v[..12]);
    }

    #[test]
    fn normalize_examples() {
        let v = normalize(&[4.0, -9.0]).unwrap();
        let r = 13f64.sqrt();
        assert!((v[0] - 2.0 / r).abs() < 1e-15 && (v[1] + 3.0 / r).abs() < 1e-15);
        assert_eq!(normalize(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(normalize(&[f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn matches_direct_formula(raw in proptest::collection::vec(-3.0f32..3.0, 0..60)) {
            let g = toy_gmm(3, 2, 1.5);
            let rows: Vec<f32> = raw[..raw.len() / 2 * 2].to_vec();
            let got = fisher_encode(&rows, 2, &g, Execution::Parallel).unwrap();
            let as64: Vec<Vec<f64>> = rows.chunks(2).map(|r| r.iter().map(|&v| v as f64).collect()).collect();
            let want = oracle(&as64, &g);
            for (a, b) in got.iter().zip(&want) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn invariant_to_row_order(raw in proptest::collection::vec(-3.0f32..3.0, 2..40), rot in 0usize..20) {
            let g = toy_gmm(3, 2, 1.5);
            let rows: Vec<f32> = raw[..raw.len() / 2 * 2].to_vec();
            let n = rows.len() / 2;
            let mut rotated = rows.clone();
            rotated.rotate_left(2 * (rot % n));
            let a = fisher_encode(&rows, 2, &g, Execution::Sequential).unwrap();
            let b = fisher_encode(&rotated, 2, &g, Execution::Sequential).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn normalized_norm_is_one(v in proptest::collection::vec(-1e3f64..1e3, 1..50)) {
            prop_assume!(v.iter().any(|&x| x != 0.0));
            let n = normalize(&v).unwrap();
            prop_assert!((n.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-9);
        }
    }
}
